"""The ledger: balances, the shielded pool, validation and application."""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np

from .models import (
    Address,
    AddressKind,
    Amount,
    PublicTxView,
    Transaction,
    TxKind,
    ViewPolicy,
    ZERO,
    public_view,
)


logger = logging.getLogger('zcash_mixsim')


class LedgerError(Exception):
    """Base class for transaction rejections."""

    def __init__(self, tx_id: str, reason: str):
        self.tx_id = tx_id
        self.reason = reason
        super().__init__(f"{type(self).__name__}: tx {tx_id}: {reason}")


class ShapeViolation(LedgerError):
    """Endpoints do not match the transaction kind's shape rule."""


class ConservationViolation(LedgerError):
    """Inputs and outputs do not sum to the same value."""


class UnfundedInput(LedgerError):
    """An input spends more than its address holds."""


class DuplicateTransaction(LedgerError):
    """A transaction with this id was already applied."""


@dataclass(frozen=True)
class LedgerEntry:
    tx: Transaction
    applied_at: int


class AddressBook:
    """Allocates opaque, unique address and transaction identifiers."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._issued: Set[str] = set()

    def new(self, kind: AddressKind) -> Address:
        prefix = 'z' if kind is AddressKind.SHIELDED else 't'
        while True:
            candidate = prefix + self._rng.bytes(10).hex()
            if candidate not in self._issued:
                self._issued.add(candidate)
                return Address(kind, candidate)

    def transparent(self) -> Address:
        return self.new(AddressKind.TRANSPARENT)

    def shielded(self) -> Address:
        return self.new(AddressKind.SHIELDED)

    def tx_id(self) -> str:
        while True:
            candidate = self._rng.bytes(16).hex()
            if candidate not in self._issued:
                self._issued.add(candidate)
                return candidate


def check_shape(tx: Transaction) -> Optional[str]:
    """
    Check the kind's endpoint-shape rule.

    Returns:
        None when the shape is valid, otherwise the reason
    """
    if not tx.inputs:
        return "no inputs"
    if not tx.outputs:
        return "no outputs"

    in_shielded = [a.is_shielded for a, _ in tx.inputs]
    out_shielded = [a.is_shielded for a, _ in tx.outputs]

    if tx.kind is TxKind.TT:
        if any(in_shielded) or any(out_shielded):
            return "TT endpoints must all be transparent"
    elif tx.kind is TxKind.TZ:
        if any(in_shielded):
            return "TZ inputs must be transparent"
        if not all(out_shielded):
            return "TZ outputs must be shielded"
        if len(tx.outputs) != 2:
            return f"TZ must have exactly two shielded outputs, got {len(tx.outputs)}"
        if tx.outputs[0][0] == tx.outputs[1][0]:
            return "TZ outputs must go to two distinct z-addresses"
    elif tx.kind is TxKind.ZT:
        if not all(in_shielded):
            return "ZT inputs must be shielded"
        if any(out_shielded):
            return "ZT outputs must be transparent"
    elif tx.kind is TxKind.ZZ:
        if not all(in_shielded) or not all(out_shielded):
            return "ZZ endpoints must all be shielded"
    return None


class Ledger:
    """
    Ordered transaction log with transparent balances and the shielded pool.

    The pool is a single value-conserving balance from the observer's point
    of view. Per-z-address balances and deposit provenance are simulator
    ground truth and never leave through public views.
    """

    def __init__(self, view_policy: ViewPolicy = ViewPolicy.PER_OUTPUT):
        self.view_policy = ViewPolicy(view_policy)
        self.entries: List[LedgerEntry] = []
        self.genesis: List[Tuple[Address, Amount]] = []
        self.total_supply = ZERO
        self.deposited = ZERO
        self.withdrawn = ZERO

        self._transparent: Dict[Address, int] = defaultdict(int)
        self._shielded: Dict[Address, int] = defaultdict(int)
        self._provenance: Dict[Address, FrozenSet[str]] = {}
        self._links: Set[Tuple[str, str]] = set()
        self._index: Dict[str, int] = {}

    # ------------------------------------------------------------------ state

    @property
    def pool_balance(self) -> Amount:
        return Amount(sum(self._shielded.values()))

    def balance(self, address: Address) -> Amount:
        book = self._shielded if address.is_shielded else self._transparent
        return Amount(book.get(address, 0))

    def contains(self, tx_id: str) -> bool:
        return tx_id in self._index

    def __len__(self) -> int:
        return len(self.entries)

    def transaction(self, tx_id: str) -> Transaction:
        return self.entries[self._index[tx_id]].tx

    @property
    def transactions(self) -> List[Transaction]:
        return [entry.tx for entry in self.entries]

    def true_links(self) -> FrozenSet[Tuple[str, str]]:
        """Ground-truth (deposit id, withdrawal id) pairs carrying value."""
        return frozenset(self._links)

    # -------------------------------------------------------------- mutation

    def fund(self, address: Address, amount: Amount) -> None:
        """
        Genesis allocation to a transparent address.

        Args:
            address: Transparent address to credit
            amount: Value minted into existence
        """
        if address.is_shielded:
            raise ValueError("genesis funds go to transparent addresses only")
        self._transparent[address] += amount.zatoshi
        self.total_supply = self.total_supply + amount
        self.genesis.append((address, amount))

    def validate(self, tx: Transaction) -> Optional[LedgerError]:
        """
        Check a transaction against the current state.

        Args:
            tx: Candidate transaction

        Returns:
            None when the transaction is acceptable, otherwise the rejection
        """
        if tx.id in self._index:
            return DuplicateTransaction(tx.id, "already in the ledger")

        reason = check_shape(tx)
        if reason is not None:
            return ShapeViolation(tx.id, reason)

        if tx.input_total != tx.output_total:
            return ConservationViolation(
                tx.id, f"inputs {tx.input_total} != outputs {tx.output_total}"
            )

        spent: Dict[Address, int] = defaultdict(int)
        for address, amount in tx.inputs:
            spent[address] += amount.zatoshi
        for address, amount in spent.items():
            held = self.balance(address).zatoshi
            if amount > held:
                return UnfundedInput(
                    tx.id, f"{address.id} spends {Amount(amount)} but holds {Amount(held)}"
                )
        return None

    def apply(self, tx: Transaction, at: Optional[int] = None) -> 'Ledger':
        """
        Validate and apply a transaction.

        Args:
            tx: Transaction to apply
            at: Tick at which the transaction becomes public (defaults to
                the transaction's own timestamp)

        Returns:
            This ledger, updated

        Raises:
            LedgerError: If validation rejects the transaction
        """
        rejection = self.validate(tx)
        if rejection is not None:
            logger.debug(f"[Ledger] Rejected {tx.id}: {rejection.reason}")
            raise rejection

        origins: Set[str] = set()
        for address, amount in tx.inputs:
            if address.is_shielded:
                self._shielded[address] -= amount.zatoshi
                if amount:
                    origins |= self._provenance.get(address, frozenset())
            else:
                self._transparent[address] -= amount.zatoshi

        # An emptied note forgets where its value came from
        for address, _ in tx.inputs:
            if address.is_shielded and self._shielded[address] == 0:
                self._provenance.pop(address, None)

        for address, amount in tx.outputs:
            if address.is_shielded:
                self._shielded[address] += amount.zatoshi
                if amount:
                    inherited = {tx.id} if tx.kind is TxKind.TZ else origins
                    self._provenance[address] = self._provenance.get(address, frozenset()) | frozenset(inherited)
            else:
                self._transparent[address] += amount.zatoshi

        if tx.kind is TxKind.TZ:
            self.deposited = self.deposited + tx.output_total
        elif tx.kind is TxKind.ZT:
            self.withdrawn = self.withdrawn + tx.input_total
            self._links.update((deposit, tx.id) for deposit in origins)

        self._index[tx.id] = len(self.entries)
        self.entries.append(LedgerEntry(tx, tx.timestamp if at is None else at))
        return self

    # ----------------------------------------------------------------- views

    def views(self) -> List[PublicTxView]:
        """Public projection of the whole log, in ledger order."""
        return [public_view(e.tx, e.applied_at, self.view_policy) for e in self.entries]

    def view_of(self, tx_id: str) -> PublicTxView:
        entry = self.entries[self._index[tx_id]]
        return public_view(entry.tx, entry.applied_at, self.view_policy)

    # ----------------------------------------------------------------- audit

    def verify_prefixes(self) -> List[str]:
        """
        Replay the log from genesis and check the invariants after every entry.

        Returns:
            Violations found; empty when every prefix is consistent
        """
        problems: List[str] = []
        transparent: Dict[Address, int] = defaultdict(int)
        shielded: Dict[Address, int] = defaultdict(int)
        supply = 0
        for address, amount in self.genesis:
            transparent[address] += amount.zatoshi
            supply += amount.zatoshi

        deposits = withdrawals = 0
        for position, entry in enumerate(self.entries):
            tx = entry.tx
            reason = check_shape(tx)
            if reason is not None:
                problems.append(f"#{position} {tx.id}: shape: {reason}")
            for address, amount in tx.inputs:
                book = shielded if address.is_shielded else transparent
                book[address] -= amount.zatoshi
            for address, amount in tx.outputs:
                book = shielded if address.is_shielded else transparent
                book[address] += amount.zatoshi
            if tx.kind is TxKind.TZ:
                deposits += tx.output_total.zatoshi
            elif tx.kind is TxKind.ZT:
                withdrawals += tx.input_total.zatoshi

            pool = sum(shielded.values())
            if pool != deposits - withdrawals or pool < 0:
                problems.append(f"#{position} {tx.id}: pool {pool} != deposits - withdrawals {deposits - withdrawals}")
            if any(v < 0 for v in transparent.values()) or any(v < 0 for v in shielded.values()):
                problems.append(f"#{position} {tx.id}: negative balance")
            if pool + sum(transparent.values()) != supply:
                problems.append(f"#{position} {tx.id}: value not conserved")
        return problems

    def write_views(self, path: Path) -> None:
        """Write one PublicTxView per line as JSON."""
        write_jsonl(path, (view.to_dict() for view in self.views()))


def write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + '\n')
