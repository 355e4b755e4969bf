"""Flat P2P broadcast network and the global passive adversary's view of it."""

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from src.ledger.ground_truth import GroundTruth, TxRecord, TxRole
from src.ledger.ledger import AddressBook, Ledger, write_jsonl
from src.ledger.models import PublicTxView, Transaction, TxKind, public_view

from .scheduler import Scheduler


logger = logging.getLogger('zcash_mixsim')


@dataclass(frozen=True, order=True)
class NetAddr:
    """Network address of a user machine, a mix, or the P2P cloud."""

    value: str

    def __str__(self) -> str:
        return self.value


P2P_ADDR = NetAddr('p2p')


@dataclass(frozen=True)
class BroadcastEvent:
    """One transaction injected into the P2P network, as the GPA records it."""

    time: int
    origin: NetAddr
    view: PublicTxView

    def to_dict(self) -> Dict[str, object]:
        amount = self.view.visible_amount
        return {
            'time': self.time,
            'origin': self.origin.value,
            'tx_id': self.view.tx_id,
            'kind': self.view.kind.value,
            'visible_amount': amount.zatoshi if amount is not None else None,
        }


@dataclass(frozen=True)
class LinkObservation:
    """A packet seen on the wire between two endpoints."""

    time: int
    src: NetAddr
    dst: NetAddr
    size: int


class BroadcastNetwork:
    """
    Single flat P2P cloud in front of the ledger.

    Every injected transaction produces a BroadcastEvent. The ledger applies
    a transaction the first time its id is broadcast; later copies (from
    redundant cascades) are recorded but idempotent.
    """

    def __init__(
        self,
        ledger: Ledger,
        scheduler: Scheduler,
        ground_truth: GroundTruth,
        ids: Optional[AddressBook] = None
    ):
        """
        Initialize the network.

        Args:
            ledger: Ledger that applies broadcast transactions
            scheduler: Event scheduler providing the clock
            ground_truth: Simulator-only record of who did what
            ids: Identifier source for cover decoys
        """
        self.ledger = ledger
        self.scheduler = scheduler
        self.ground_truth = ground_truth
        self.ids = ids or AddressBook(scheduler.rng('ids'))

        self._trace: List[BroadcastEvent] = []
        self._wire: List[LinkObservation] = []
        self._listeners: List[Callable[[Transaction, int], None]] = []
        self._first_broadcast: Dict[str, int] = {}
        self.channel_counts: Counter = Counter()

    # -------------------------------------------------------------- listeners

    def on_applied(self, callback: Callable[[Transaction, int], None]) -> None:
        """Register a callback fired with (tx, tick) whenever the ledger applies a tx."""
        self._listeners.append(callback)

    # ------------------------------------------------------------ broadcasting

    def broadcast(self, origin: NetAddr, tx: Transaction, channel: str = 'direct') -> BroadcastEvent:
        """
        Inject a transaction at the current tick.

        Args:
            origin: Network address doing the injection (user or mix exit)
            tx: Transaction to broadcast
            channel: 'direct' or 'exit', for trace accounting

        Returns:
            The BroadcastEvent appended to the trace

        Raises:
            LedgerError: If the ledger rejects a first-seen transaction
        """
        now = self.scheduler.now
        duplicate = self.ledger.contains(tx.id)
        if not duplicate:
            self.ledger.apply(tx, at=now)
            self._first_broadcast[tx.id] = now

        event = BroadcastEvent(now, origin, public_view(tx, self._first_broadcast[tx.id], self.ledger.view_policy))
        self._trace.append(event)
        self.channel_counts[channel] += 1

        if duplicate:
            self.ground_truth.duplicate_events += 1
            logger.debug(f"[P2P] Duplicate broadcast of {tx.id} from {origin} ignored by ledger")
        else:
            for listener in self._listeners:
                listener(tx, now)
        return event

    def direct_broadcast(self, user: NetAddr, tx: Transaction, at: int) -> BroadcastEvent:
        """
        Broadcast a user's transaction from the user's own machine.

        The transaction is checked against the current ledger now (the
        wallet's check) and injected at tick `at`.

        Args:
            user: The user's network address
            tx: Transaction to broadcast
            at: Tick of injection, not before the current tick

        Returns:
            The BroadcastEvent that will be appended at tick `at`

        Raises:
            LedgerError: If the ledger currently rejects the transaction
            SchedulingInPast: If at is before the current tick
        """
        rejection = self.ledger.validate(tx)
        if rejection is not None:
            raise rejection
        self.scheduler.schedule(lambda: self.broadcast(user, tx, 'direct'), at)
        return BroadcastEvent(at, user, public_view(tx, at, self.ledger.view_policy))

    def decoy_broadcast(self, origin: NetAddr) -> BroadcastEvent:
        """
        Inject a cover decoy: a ZZ-shaped event that the ledger never applies.

        Args:
            origin: Mix exit emitting the decoy

        Returns:
            The decoy BroadcastEvent
        """
        now = self.scheduler.now
        tx_id = self.ids.tx_id()
        self.ground_truth.register(TxRecord(tx_id, owner=None, role=TxRole.COVER))
        event = BroadcastEvent(now, origin, PublicTxView(tx_id, TxKind.ZZ, (), None, now))
        self._trace.append(event)
        self.channel_counts['cover'] += 1
        return event

    # ------------------------------------------------------------------- wire

    def observe_link(self, src: NetAddr, dst: NetAddr, size: int) -> None:
        """Record a packet transmission visible to the GPA."""
        self._wire.append(LinkObservation(self.scheduler.now, src, dst, size))

    # ---------------------------------------------------------------- results

    def trace(self) -> Tuple[BroadcastEvent, ...]:
        """Complete, time-ordered broadcast record."""
        return tuple(self._trace)

    def wire_log(self) -> Tuple[LinkObservation, ...]:
        return tuple(self._wire)

    def first_broadcast_tick(self, tx_id: str) -> Optional[int]:
        return self._first_broadcast.get(tx_id)

    def added_latencies(self, submitted: Mapping[str, int]) -> List[int]:
        """First broadcast tick minus submission tick, per delivered transaction."""
        result = []
        for tx_id, at in submitted.items():
            first = self._first_broadcast.get(tx_id)
            if first is not None:
                result.append(first - at)
        return result

    def delivery_rate(self, submitted: Mapping[str, int]) -> float:
        """Share of submitted transactions the ledger applied; 1.0 when nothing was submitted."""
        if not submitted:
            return 1.0
        return sum(1 for tx_id in submitted if self.ledger.contains(tx_id)) / len(submitted)

    def write_trace(self, path: Path) -> None:
        """Write the trace as line-delimited JSON."""
        write_jsonl(path, (event.to_dict() for event in self._trace))
