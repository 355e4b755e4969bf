"""Addresses, amounts, transactions and their public projections."""

import json
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Tuple


ZATOSHI_PER_ZEC = 10 ** 8


class AddressKind(str, Enum):
    TRANSPARENT = 'transparent'
    SHIELDED = 'shielded'


class TxKind(str, Enum):
    """The four transaction kinds, named by source and destination address type."""

    TT = 'TT'   # transparent
    TZ = 'TZ'   # shielding (deposit into the pool)
    ZT = 'ZT'   # deshielding (withdrawal from the pool)
    ZZ = 'ZZ'   # private


class ViewPolicy(str, Enum):
    """How much of a deposit's value an observer learns."""

    TOTAL = 'total'
    PER_OUTPUT = 'per_output'


@dataclass(frozen=True, order=True)
class Amount:
    """Non-negative integer number of zatoshi (1 ZEC = 10^8 zatoshi)."""

    zatoshi: int

    def __post_init__(self):
        if isinstance(self.zatoshi, bool) or not isinstance(self.zatoshi, int):
            raise TypeError(f"Amount must be an integer number of zatoshi, got {self.zatoshi!r}")
        if self.zatoshi < 0:
            raise ValueError(f"Amount cannot be negative: {self.zatoshi}")

    @classmethod
    def from_zec(cls, zec: Any) -> 'Amount':
        """Exact conversion from a ZEC value (int, str or float literal)."""
        zat = Decimal(str(zec)) * ZATOSHI_PER_ZEC
        if zat != zat.to_integral_value():
            raise ValueError(f"{zec} ZEC is not a whole number of zatoshi")
        return cls(int(zat))

    @classmethod
    def total(cls, amounts: Iterable['Amount']) -> 'Amount':
        return cls(sum(a.zatoshi for a in amounts))

    @property
    def zec(self) -> Decimal:
        return Decimal(self.zatoshi) / ZATOSHI_PER_ZEC

    def __add__(self, other: 'Amount') -> 'Amount':
        return Amount(self.zatoshi + other.zatoshi)

    def __sub__(self, other: 'Amount') -> 'Amount':
        return Amount(self.zatoshi - other.zatoshi)

    def __bool__(self) -> bool:
        return self.zatoshi != 0

    def __str__(self) -> str:
        return f"{self.zec.normalize():f} ZEC"


ZERO = Amount(0)


@dataclass(frozen=True, order=True)
class Address:
    """A t-address or z-address. Ids are unique within a simulation."""

    kind: AddressKind
    id: str

    @property
    def is_shielded(self) -> bool:
        return self.kind is AddressKind.SHIELDED

    def __str__(self) -> str:
        return self.id


Endpoint = Tuple[Address, Amount]


@dataclass(frozen=True)
class Transaction:
    """
    A transaction as created by a user's wallet.

    The timestamp is the wallet's creation tick; the tick at which the
    transaction becomes public is recorded by the ledger on application.
    """

    id: str
    kind: TxKind
    inputs: Tuple[Endpoint, ...]
    outputs: Tuple[Endpoint, ...]
    timestamp: int

    @property
    def input_total(self) -> Amount:
        return Amount.total(amount for _, amount in self.inputs)

    @property
    def output_total(self) -> Amount:
        return Amount.total(amount for _, amount in self.outputs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'kind': self.kind.value,
            'inputs': [_endpoint_to_dict(e) for e in self.inputs],
            'outputs': [_endpoint_to_dict(e) for e in self.outputs],
            'timestamp': self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Transaction':
        return cls(
            id=data['id'],
            kind=TxKind(data['kind']),
            inputs=tuple(_endpoint_from_dict(e) for e in data['inputs']),
            outputs=tuple(_endpoint_from_dict(e) for e in data['outputs']),
            timestamp=int(data['timestamp']),
        )

    def to_bytes(self) -> bytes:
        """Canonical serialization (sorted keys, compact separators)."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':')).encode('utf-8')

    @classmethod
    def from_bytes(cls, raw: bytes) -> 'Transaction':
        return cls.from_dict(json.loads(raw.decode('utf-8')))


def _endpoint_to_dict(endpoint: Endpoint) -> Dict[str, Any]:
    address, amount = endpoint
    return {'address': address.id, 'kind': address.kind.value, 'zatoshi': amount.zatoshi}


def _endpoint_from_dict(data: Dict[str, Any]) -> Endpoint:
    return Address(AddressKind(data['kind']), data['address']), Amount(int(data['zatoshi']))


@dataclass(frozen=True)
class PublicTxView:
    """Exactly what a blockchain observer learns about one transaction."""

    tx_id: str
    kind: TxKind
    visible_endpoints: Tuple[Address, ...]
    visible_amount: Optional[Amount]
    timestamp: int
    # Address-free output values of a deposit; empty unless exposed by the view policy
    output_amounts: Tuple[Amount, ...] = field(default=())

    @property
    def matchable_amounts(self) -> Tuple[Amount, ...]:
        """
        Non-zero deposit values an observer can match withdrawals against.

        Per-output values when the view exposes them, otherwise the total.
        Only meaningful for TZ views; other kinds return an empty tuple.
        """
        if self.kind is not TxKind.TZ:
            return ()
        if self.output_amounts:
            return tuple(a for a in self.output_amounts if a)
        if self.visible_amount:
            return (self.visible_amount,)
        return ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tx_id': self.tx_id,
            'kind': self.kind.value,
            'visible_endpoints': [a.id for a in self.visible_endpoints],
            'visible_amount': self.visible_amount.zatoshi if self.visible_amount is not None else None,
            'output_amounts': [a.zatoshi for a in self.output_amounts],
            'timestamp': self.timestamp,
        }


def public_view(
    tx: Transaction,
    timestamp: Optional[int] = None,
    policy: ViewPolicy = ViewPolicy.PER_OUTPUT
) -> PublicTxView:
    """
    Project a transaction onto what the public blockchain reveals.

    Args:
        tx: Well-formed transaction
        timestamp: Tick at which the transaction became public; defaults to
            the transaction's own timestamp
        policy: Whether deposit output values are exposed individually

    Returns:
        PublicTxView containing no shielded address
    """
    when = tx.timestamp if timestamp is None else timestamp

    if tx.kind is TxKind.TT:
        endpoints = _unique_addresses([a for a, _ in tx.inputs] + [a for a, _ in tx.outputs])
        return PublicTxView(tx.id, tx.kind, endpoints, tx.output_total, when)

    if tx.kind is TxKind.TZ:
        endpoints = _unique_addresses(a for a, _ in tx.inputs)
        outputs: Tuple[Amount, ...] = ()
        if policy is ViewPolicy.PER_OUTPUT:
            outputs = tuple(sorted((amount for _, amount in tx.outputs), reverse=True))
        return PublicTxView(tx.id, tx.kind, endpoints, tx.input_total, when, outputs)

    if tx.kind is TxKind.ZT:
        endpoints = _unique_addresses(a for a, _ in tx.outputs)
        return PublicTxView(tx.id, tx.kind, endpoints, tx.output_total, when)

    return PublicTxView(tx.id, tx.kind, (), None, when)


def _unique_addresses(addresses: Iterable[Address]) -> Tuple[Address, ...]:
    # Transparent only; order of first appearance
    seen = []
    for address in addresses:
        if not address.is_shielded and address not in seen:
            seen.append(address)
    return tuple(seen)
