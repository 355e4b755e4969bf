"""User wallets driving deposit, private-transfer and withdrawal lifecycles."""

import logging
from typing import Callable, Dict, List, Optional, Tuple

from src.advisor.service import AdvisoryService
from src.ledger.ground_truth import GroundTruth, TxRecord, TxRole
from src.ledger.ledger import AddressBook, LedgerError
from src.ledger.models import Address, Amount, Transaction, TxKind, ZERO
from src.network.p2p import NetAddr
from src.network.scheduler import Scheduler

from .workload import ADVISED, DepositPlan, PaymentPlan, UserPlan


logger = logging.getLogger('zcash_mixsim')

Submit = Callable[[NetAddr, Transaction], None]


class UserAgent:
    """
    One user's wallet.

    A deposit moves the planned value from the funding t-address into two
    fresh z-addresses: (X, 0) for a naive user, the advised (a, b)
    otherwise. Once confirmed, every non-zero note waits its think time,
    takes `zz_hops` private hops to fresh z-addresses, and is withdrawn to a
    fresh t-address of the same user.
    """

    def __init__(
        self,
        plan: UserPlan,
        address: NetAddr,
        ids: AddressBook,
        scheduler: Scheduler,
        ground_truth: GroundTruth,
        submit: Submit,
        pending: Dict[str, Callable[[], None]],
        zz_hops: int = 0,
        advisor: Optional[AdvisoryService] = None
    ):
        """
        Initialize the agent.

        Args:
            plan: Pre-drawn workload for this user
            address: The user's network address
            ids: Shared address and transaction id source
            scheduler: Event scheduler
            ground_truth: Simulator ground truth to register transactions in
            submit: Route that carries a transaction to the P2P network
            pending: Shared map of tx id -> confirmation continuation
            zz_hops: Private transfers between deposit and withdrawal
            advisor: Split advisor, used when the plan's behavior is advised
        """
        self.plan = plan
        self.user = plan.user
        self.address = address
        self.ids = ids
        self.scheduler = scheduler
        self.ground_truth = ground_truth
        self.submit = submit
        self.pending = pending
        self.zz_hops = zz_hops
        self.advisor = advisor

        self.funding = ids.transparent()
        self.receiving = ids.transparent()
        self.directory: Dict[int, Address] = {}
        self.sent: List[str] = []

    @property
    def advised(self) -> bool:
        return self.plan.behavior == ADVISED and self.advisor is not None

    def start(self) -> None:
        """Schedule every planned deposit and payment."""
        for deposit in self.plan.deposits:
            self.scheduler.schedule(lambda d=deposit: self._deposit(d), deposit.start)
        for payment in self.plan.payments:
            self.scheduler.schedule(lambda p=payment: self._pay(p), payment.at)

    # ------------------------------------------------------------ lifecycle

    def _deposit(self, plan: DepositPlan) -> None:
        amount = plan.amount
        first, second = self.ids.shielded(), self.ids.shielded()
        fallback = False
        if self.advised:
            advice = self.advisor.request(self.address, amount)
            outputs = ((first, advice.parts[0]), (second, advice.parts[1]))
            fallback = advice.fallback
        else:
            outputs = ((first, amount), (second, ZERO))

        tx = self._transaction(TxKind.TZ, ((self.funding, amount),), outputs)
        self.ground_truth.register(TxRecord(
            tx.id, self.user, TxRole.DEPOSIT,
            naive=not self.advised, advised=self.advised, fallback=fallback,
        ))
        notes = [(address, value) for address, value in outputs if value]
        self._send(tx, lambda: self._notes_confirmed(plan, notes))

    def _notes_confirmed(self, plan: DepositPlan, notes: List[Tuple[Address, Amount]]) -> None:
        for index, (address, value) in enumerate(notes):
            self._after_think(plan, index, 0, address, value)

    def _after_think(self, plan: DepositPlan, note: int, step: int, address: Address, value: Amount) -> None:
        delay = plan.think_times[note][step]
        self.scheduler.schedule_after(lambda: self._step(plan, note, step, address, value), delay)

    def _step(self, plan: DepositPlan, note: int, step: int, address: Address, value: Amount) -> None:
        if step < self.zz_hops:
            target = self.ids.shielded()
            tx = self._transaction(TxKind.ZZ, ((address, value),), ((target, value),))
            self.ground_truth.register(TxRecord(tx.id, self.user, TxRole.PRIVATE))
            self._send(tx, lambda: self._after_think(plan, note, step + 1, target, value))
            return

        tx = self._transaction(TxKind.ZT, ((address, value),), ((self.ids.transparent(), value),))
        self.ground_truth.register(TxRecord(tx.id, self.user, TxRole.WITHDRAWAL))
        self._send(tx)

    def _pay(self, payment: PaymentPlan) -> None:
        recipient = self.directory[payment.recipient]
        tx = self._transaction(TxKind.TT, ((self.funding, payment.amount),), ((recipient, payment.amount),))
        self.ground_truth.register(TxRecord(tx.id, self.user, TxRole.TRANSPARENT))
        self._send(tx)

    # -------------------------------------------------------------- helpers

    def _transaction(self, kind: TxKind, inputs, outputs) -> Transaction:
        return Transaction(self.ids.tx_id(), kind, tuple(inputs), tuple(outputs), self.scheduler.now)

    def _send(self, tx: Transaction, on_confirm: Optional[Callable[[], None]] = None) -> None:
        if on_confirm is not None:
            self.pending[tx.id] = on_confirm
        try:
            self.submit(self.address, tx)
        except LedgerError as e:
            self.pending.pop(tx.id, None)
            logger.error(f"[User {self.user}] Wallet refused {tx.kind.value} {tx.id}: {e}")
            return
        self.sent.append(tx.id)
