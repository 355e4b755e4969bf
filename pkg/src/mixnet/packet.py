"""Layered packet format: routing headers, exit payloads, wrap and peel."""

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

from src.ledger.models import Transaction
from src.network.p2p import NetAddr, P2P_ADDR

from .sealing import IntegrityFailure, LayerSealer, MixnetError

if TYPE_CHECKING:
    from .mix_node import MixNode


# kind, next-address length, next address, inner length
HEADER_FORMAT = '!BH64sI'
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
MAX_ADDRESS = 64

# instruction, tx length
PAYLOAD_PREFIX = '!BI'
PAYLOAD_PREFIX_SIZE = struct.calcsize(PAYLOAD_PREFIX)
PAYLOAD_SIZE = 1024


class EmptyCascade(MixnetError):
    """A packet cannot be wrapped for a cascade with no mixes."""


class PayloadTooLarge(MixnetError):
    """The serialized transaction does not fit in the fixed exit payload."""


class HopKind(IntEnum):
    FORWARD = 1
    EXIT = 2


class Instruction(IntEnum):
    """What the exit mix does with the payload."""

    BROADCAST = 1
    COVER_DROP = 2
    COVER_DECOY = 3


@dataclass(frozen=True)
class LayeredPacket:
    """
    A sealed packet in flight.

    Only `body` travels on the wire (padded to the frame size); `dest` is the
    link-level address. `flow_id` is simulator bookkeeping.
    """

    dest: NetAddr
    layers_remaining: int
    body: bytes
    flow_id: Optional[int] = field(default=None, compare=False)

    @property
    def is_cover(self) -> bool:
        return False

    def wire_bytes(self, frame_size: int) -> bytes:
        if len(self.body) > frame_size:
            raise MixnetError(f"body of {len(self.body)} bytes exceeds frame size {frame_size}")
        return self.body + bytes(frame_size - len(self.body))

    def relayed(self, dest: NetAddr, body: bytes) -> 'LayeredPacket':
        """The packet one layer further in, keeping its class and flow."""
        return type(self)(dest, self.layers_remaining - 1, body, self.flow_id)


@dataclass(frozen=True)
class CoverPacket(LayeredPacket):
    """Loop cover: same wire shape as a real packet."""

    @property
    def is_cover(self) -> bool:
        return True


@dataclass(frozen=True)
class PeeledLayer:
    """Result of removing one layer."""

    kind: HopKind
    next_hop: NetAddr
    inner: bytes


def body_size(layers: int, sealer: LayerSealer) -> int:
    """Sealed body length of a packet with `layers` remaining layers."""
    size = PAYLOAD_SIZE
    for _ in range(layers):
        size = HEADER_SIZE + size + sealer.overhead
    return size


def frame_size(max_layers: int, sealer: LayerSealer) -> int:
    """Wire size every packet is padded to, given the deepest cascade."""
    return body_size(max_layers, sealer)


def encode_payload(instruction: Instruction, tx_bytes: bytes = b'') -> bytes:
    if PAYLOAD_PREFIX_SIZE + len(tx_bytes) > PAYLOAD_SIZE:
        raise PayloadTooLarge(
            f"transaction of {len(tx_bytes)} bytes exceeds payload size {PAYLOAD_SIZE - PAYLOAD_PREFIX_SIZE}"
        )
    raw = struct.pack(PAYLOAD_PREFIX, instruction, len(tx_bytes)) + tx_bytes
    return raw + bytes(PAYLOAD_SIZE - len(raw))


def decode_payload(payload: bytes) -> Tuple[Instruction, bytes]:
    instruction, length = struct.unpack_from(PAYLOAD_PREFIX, payload)
    body = payload[PAYLOAD_PREFIX_SIZE:PAYLOAD_PREFIX_SIZE + length]
    return Instruction(instruction), body


def _header(kind: HopKind, next_hop: NetAddr, inner_length: int) -> bytes:
    address = next_hop.value.encode('utf-8')
    if len(address) > MAX_ADDRESS:
        raise MixnetError(f"address {next_hop} longer than {MAX_ADDRESS} bytes")
    return struct.pack(HEADER_FORMAT, kind, len(address), address, inner_length)


def seal_route(
    payload: bytes,
    route: Sequence['MixNode'],
    rng: np.random.Generator,
    cover: bool = False
) -> LayeredPacket:
    """
    Seal a fixed-size payload for a route of mixes, innermost layer first.

    Args:
        payload: Exit payload produced by encode_payload()
        route: Mixes in travel order; the last one is the exit
        rng: Sealing random stream
        cover: Build a CoverPacket instead of a LayeredPacket

    Returns:
        Packet addressed to the first mix of the route

    Raises:
        EmptyCascade: If route is empty
    """
    if not route:
        raise EmptyCascade("cannot wrap a packet for an empty cascade")

    blob = payload
    next_hop = P2P_ADDR
    kind = HopKind.EXIT
    for node in reversed(route):
        plaintext = _header(kind, next_hop, len(blob)) + blob
        blob = node.sealer.seal(node.keys.public, plaintext, rng)
        next_hop = node.address
        kind = HopKind.FORWARD

    packet_type = CoverPacket if cover else LayeredPacket
    return packet_type(route[0].address, len(route), blob)


def wrap(tx: Transaction, cascade, rng: np.random.Generator) -> LayeredPacket:
    """
    Encapsulate a transaction for a cascade with a Broadcast instruction.

    Args:
        tx: Transaction for the exit mix to broadcast
        cascade: Cascade (or any sequence of mixes) to travel through
        rng: Sealing random stream

    Returns:
        LayeredPacket with one layer per mix

    Raises:
        EmptyCascade: If the cascade has no mixes
        PayloadTooLarge: If the transaction does not fit the payload
    """
    nodes = getattr(cascade, 'nodes', cascade)
    if not nodes:
        raise EmptyCascade("cannot wrap a packet for an empty cascade")
    return seal_route(encode_payload(Instruction.BROADCAST, tx.to_bytes()), nodes, rng)


def peel(packet: LayeredPacket, node: 'MixNode') -> PeeledLayer:
    """
    Remove the outer layer with the mix's private key.

    Raises:
        IntegrityFailure: If the layer fails authentication or is malformed
    """
    plaintext = node.sealer.open(node.keys.private, packet.body)
    if len(plaintext) < HEADER_SIZE:
        raise IntegrityFailure("layer shorter than its routing header")

    kind, length, address, inner_length = struct.unpack_from(HEADER_FORMAT, plaintext)
    inner = plaintext[HEADER_SIZE:]
    if kind not in (HopKind.FORWARD, HopKind.EXIT) or length > MAX_ADDRESS or inner_length != len(inner):
        raise IntegrityFailure("malformed routing header")
    return PeeledLayer(HopKind(kind), NetAddr(address[:length].decode('utf-8')), inner)
