"""Mix nodes and per-hop packet processing."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from src.ledger.models import Transaction
from src.network.p2p import NetAddr

from .packet import HopKind, Instruction, LayeredPacket, decode_payload, peel
from .sealing import IntegrityFailure, LayerSealer, MixKeys, MixnetError


logger = logging.getLogger('zcash_mixsim')


class WrongHop(MixnetError):
    """A packet reached a mix that is not its current hop."""


class MixBehavior(str, Enum):
    HONEST = 'honest'
    DROPPER = 'dropper'


@dataclass(frozen=True)
class DelayPolicy:
    """Continuous-time per-packet exponential delay with mean `mean` ticks."""

    mean: float

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError(f"mean delay must be positive, got {self.mean}")


def sample_delay(policy: Union[DelayPolicy, float], rng: np.random.Generator) -> int:
    """
    Draw one hop delay.

    Args:
        policy: DelayPolicy or its mean in ticks
        rng: Delay random stream

    Returns:
        Exponential draw rounded to whole ticks, at least 1
    """
    mean = policy.mean if isinstance(policy, DelayPolicy) else float(policy)
    return max(1, int(round(rng.exponential(mean))))


@dataclass(frozen=True)
class MixNode:
    id: str
    address: NetAddr
    keys: MixKeys
    sealer: LayerSealer
    policy: DelayPolicy
    behavior: MixBehavior = MixBehavior.HONEST
    cascade: int = 0
    position: int = 0


@dataclass(frozen=True)
class Forward:
    next_hop: NetAddr
    packet: LayeredPacket
    at: int


@dataclass(frozen=True)
class Broadcast:
    """Exit action. A None tx is a cover decoy that the ledger never sees."""

    tx: Optional[Transaction]
    origin: NetAddr
    at: int

    @property
    def is_decoy(self) -> bool:
        return self.tx is None


@dataclass(frozen=True)
class Drop:
    reason: str
    at: int


Action = Union[Forward, Broadcast, Drop]


def process(mix: MixNode, packet: LayeredPacket, now: int, rng: np.random.Generator) -> Action:
    """
    Handle one packet arriving at a mix.

    An honest mix removes its layer, draws a delay and emits the resulting
    action at now + delay. A dropper discards every packet on arrival.

    Args:
        mix: Receiving mix
        packet: Packet addressed to it
        now: Arrival tick
        rng: Delay random stream

    Returns:
        Forward, Broadcast or Drop

    Raises:
        WrongHop: If the packet is addressed to a different mix
    """
    if packet.dest != mix.address:
        raise WrongHop(f"packet for {packet.dest} delivered to {mix.address}")

    if mix.behavior is MixBehavior.DROPPER:
        return Drop('dropper', now)

    try:
        layer = peel(packet, mix)
    except IntegrityFailure as e:
        logger.warning(f"[Mixnet] {mix.id} dropped packet (flow {packet.flow_id}): {e}")
        return Drop('integrity', now)

    exit_layer = layer.kind is HopKind.EXIT
    if exit_layer != (packet.layers_remaining == 1):
        logger.warning(f"[Mixnet] {mix.id} dropped packet (flow {packet.flow_id}): layer count mismatch")
        return Drop('integrity', now)

    at = now + sample_delay(mix.policy, rng)

    if not exit_layer:
        return Forward(layer.next_hop, packet.relayed(layer.next_hop, layer.inner), at)

    instruction, tx_bytes = decode_payload(layer.inner)
    if instruction is Instruction.BROADCAST:
        return Broadcast(Transaction.from_bytes(tx_bytes), mix.address, at)
    if instruction is Instruction.COVER_DECOY:
        return Broadcast(None, mix.address, at)
    return Drop('cover', at)
