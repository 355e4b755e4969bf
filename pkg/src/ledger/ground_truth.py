"""Simulator-only knowledge used to score attacks."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .ledger import Ledger, write_jsonl


class TxRole(str, Enum):
    TRANSPARENT = 'transparent'
    DEPOSIT = 'deposit'
    PRIVATE = 'private'
    WITHDRAWAL = 'withdrawal'
    COVER = 'cover'


@dataclass
class TxRecord:
    tx_id: str
    owner: Optional[int]
    role: TxRole
    naive: bool = False
    advised: bool = False
    fallback: bool = False


@dataclass
class GroundTruth:
    """
    Who did what, as only the simulator knows it.

    Attributes:
        records: tx id -> TxRecord for every user-originated tx and decoy
        user_addrs: user index -> network address string
        links: true (deposit id, withdrawal id) pairs
    """

    records: Dict[str, TxRecord] = field(default_factory=dict)
    user_addrs: Dict[int, str] = field(default_factory=dict)
    links: FrozenSet[Tuple[str, str]] = frozenset()
    duplicate_events: int = 0

    def register(self, record: TxRecord) -> None:
        self.records[record.tx_id] = record

    def knows(self, tx_id: str) -> bool:
        return tx_id in self.records

    def owner_of(self, tx_id: str) -> Optional[int]:
        record = self.records.get(tx_id)
        return record.owner if record else None

    def is_cover(self, tx_id: str) -> bool:
        record = self.records.get(tx_id)
        return record is not None and record.role is TxRole.COVER

    def user_transactions(self, user: int) -> List[str]:
        return [r.tx_id for r in self.records.values() if r.owner == user and r.role is not TxRole.COVER]

    def by_role(self, role: TxRole) -> List[TxRecord]:
        return [r for r in self.records.values() if r.role is role]

    def user_originated(self) -> Set[str]:
        return {r.tx_id for r in self.records.values() if r.role is not TxRole.COVER}

    def sync_links(self, ledger: Ledger) -> None:
        """Copy the ledger's provenance-derived deposit/withdrawal links."""
        self.links = ledger.true_links()

    def write(self, path: Path) -> None:
        """Write one record per line, plus one line per true link."""
        rows = []
        for tx_id in sorted(self.records):
            r = self.records[tx_id]
            rows.append({
                'type': 'tx',
                'tx_id': r.tx_id,
                'owner': r.owner,
                'origin': self.user_addrs.get(r.owner) if r.owner is not None else None,
                'role': r.role.value,
                'naive': r.naive,
                'advised': r.advised,
                'fallback': r.fallback,
            })
        for deposit, withdrawal in sorted(self.links):
            rows.append({'type': 'link', 'deposit': deposit, 'withdrawal': withdrawal})
        write_jsonl(path, rows)
