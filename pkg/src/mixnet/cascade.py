"""Mix cascades and the transport that moves packets through them."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.ledger.ledger import LedgerError
from src.ledger.models import Transaction
from src.network.p2p import BroadcastNetwork, NetAddr, P2P_ADDR
from src.network.scheduler import Scheduler
from src.utils.logger import HopLog

from .mix_node import Broadcast, DelayPolicy, Forward, MixBehavior, MixNode, process
from .packet import CoverPacket, Instruction, LayeredPacket, encode_payload, frame_size, seal_route, wrap
from .sealing import MixnetError, get_sealer


logger = logging.getLogger('zcash_mixsim')


class InsufficientCascades(MixnetError):
    """Redundancy k is outside 1..number of cascades."""


@dataclass(frozen=True)
class Cascade:
    """Fixed ordered chain of mixes; the last one is the exit."""

    index: int
    nodes: Tuple[MixNode, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def entry(self) -> MixNode:
        return self.nodes[0]

    @property
    def exit(self) -> MixNode:
        return self.nodes[-1]

    def predecessor(self, node: MixNode) -> Optional[NetAddr]:
        return self.nodes[node.position - 1].address if node.position > 0 else None

    def successor(self, node: MixNode) -> NetAddr:
        if node.position + 1 < len(self.nodes):
            return self.nodes[node.position + 1].address
        return P2P_ADDR


@dataclass
class FlowRecord:
    """Ground truth for one wrapped copy of a transaction or one cover packet."""

    flow_id: int
    tx_id: Optional[str]
    cascade: int
    source: NetAddr
    submitted: int
    cover: bool = False
    outcome: Optional[str] = None
    outcome_at: Optional[int] = None
    last_mix: Optional[NetAddr] = None


def cover_arrivals(rate: float, rng: np.random.Generator, start: int, end: int) -> Iterator[int]:
    """
    Arrival ticks of a Poisson process with `rate` events per tick on [start, end).

    Args:
        rate: Events per tick; 0 yields nothing
        rng: Cover random stream
        start: First tick of the window
        end: Tick after the window
    """
    if rate <= 0:
        return
    t = float(start)
    while True:
        t += rng.exponential(1.0 / rate)
        if t >= end:
            return
        yield int(t)


def emit_cover(
    routes: Sequence[Sequence[MixNode]],
    rate: float,
    rng: np.random.Generator,
    start: int,
    end: int,
    seal_rng: np.random.Generator,
    instruction: Instruction = Instruction.COVER_DROP
) -> Iterator[Tuple[int, CoverPacket]]:
    """
    Stream of cover packets from one source.

    Each arrival picks one of the source's routes uniformly and seals a
    cover payload for it.

    Args:
        routes: Candidate mix routes (empty routes are ignored)
        rate: Poisson rate per tick
        rng: Cover random stream (arrivals and route choice)
        start: First tick
        end: Tick after the last possible arrival
        seal_rng: Sealing random stream
        instruction: COVER_DROP or COVER_DECOY for the exit

    Yields:
        (tick, CoverPacket) pairs in time order
    """
    usable = [route for route in routes if route]
    if not usable:
        return
    payload = encode_payload(instruction)
    for tick in cover_arrivals(rate, rng, start, end):
        route = usable[int(rng.integers(len(usable)))] if len(usable) > 1 else usable[0]
        yield tick, seal_route(payload, route, seal_rng, cover=True)


def build_cascades(config: Dict[str, Any], rng: np.random.Generator) -> List[Cascade]:
    """
    Create cascades, keys and behaviors from the mixnet config section.

    Args:
        config: Full scenario configuration
        rng: Key generation random stream

    Returns:
        List of cascades
    """
    mix_config = config.get('mixnet', {})
    sealer = get_sealer(mix_config.get('sealer', 'keyed_stream'))
    policy = DelayPolicy(float(mix_config.get('mean_delay', 50)))
    droppers = {tuple(p) for p in mix_config.get('droppers', [])}

    cascades = []
    for c in range(mix_config.get('cascades', 1)):
        nodes = []
        for p in range(mix_config.get('length', 3)):
            behavior = MixBehavior.DROPPER if (c, p) in droppers else MixBehavior.HONEST
            nodes.append(MixNode(
                id=f"mix-{c}-{p}",
                address=NetAddr(f"mix-{c}-{p}"),
                keys=sealer.generate_keypair(rng),
                sealer=sealer,
                policy=policy,
                behavior=behavior,
                cascade=c,
                position=p,
            ))
        cascades.append(Cascade(c, tuple(nodes)))
    return cascades


class MixNetwork:
    """
    Event-driven transport over a set of cascades.

    Packets move through the scheduler: a transmission is observed on the
    wire, the receiving mix processes it on arrival, and its action fires
    after the sampled delay. Exit broadcasts go to the P2P network under the
    exit mix's own address.
    """

    def __init__(
        self,
        config: Dict[str, Any],
        scheduler: Scheduler,
        network: BroadcastNetwork,
        hop_log: Optional[HopLog] = None,
        cascades: Optional[List[Cascade]] = None
    ):
        """
        Initialize the mix network.

        Args:
            config: Full scenario configuration
            scheduler: Shared event scheduler
            network: P2P network the exits broadcast into
            hop_log: Per-hop processing log
            cascades: Prebuilt cascades; built from config when omitted
        """
        mix_config = config.get('mixnet', {})
        self.scheduler = scheduler
        self.network = network
        self.hop_log = hop_log or HopLog('mixnet')
        self.cover_mode = mix_config.get('cover_mode', 'drop')
        self.cascades = cascades if cascades is not None else build_cascades(config, scheduler.rng('keys'))

        self._nodes: Dict[NetAddr, MixNode] = {n.address: n for c in self.cascades for n in c.nodes}
        self.sealer = self.cascades[0].entry.sealer
        self.frame_size = frame_size(max((len(c) for c in self.cascades), default=1), self.sealer)

        self._seal_rng = scheduler.rng('sealing')
        self._delay_rng = scheduler.rng('delays')
        self._choice_rng = scheduler.rng('cascade_choice')
        self._cover_rng = scheduler.rng('cover')

        self.observed: Dict[NetAddr, Set[NetAddr]] = defaultdict(set)
        self.flows: Dict[int, FlowRecord] = {}
        self.submitted: Dict[str, int] = {}

        logger.info(
            f"[Mixnet] {len(self.cascades)} cascade(s) of length "
            f"{[len(c) for c in self.cascades]}, frame size {self.frame_size} bytes"
        )

    # ---------------------------------------------------------------- lookup

    def node(self, address: NetAddr) -> MixNode:
        return self._nodes[address]

    def is_mix(self, address: NetAddr) -> bool:
        return address in self._nodes

    @property
    def exit_addresses(self) -> FrozenSet[NetAddr]:
        return frozenset(c.exit.address for c in self.cascades)

    # ------------------------------------------------------------- real txs

    def submit(self, user: NetAddr, tx: Transaction, cascade: Cascade) -> FlowRecord:
        """
        Wrap a transaction for one cascade and hand it to the entry mix now.

        Returns:
            FlowRecord tracking this copy
        """
        flow = self._new_flow(tx.id, cascade.index, user)
        packet = wrap(tx, cascade, self._seal_rng)
        self.submitted.setdefault(tx.id, self.scheduler.now)
        self._transmit(user, LayeredPacket(packet.dest, packet.layers_remaining, packet.body, flow.flow_id))
        return flow

    def send_redundant(
        self,
        user: NetAddr,
        tx: Transaction,
        k: int,
        cascades: Optional[Sequence[Cascade]] = None
    ) -> List[FlowRecord]:
        """
        Send independently wrapped copies of a transaction through k distinct cascades.

        Args:
            user: Sending user's address
            tx: Transaction to broadcast
            k: Number of copies
            cascades: Candidate cascades (default: all)

        Returns:
            One FlowRecord per copy

        Raises:
            InsufficientCascades: If k is not in 1..len(cascades)
        """
        pool = list(self.cascades if cascades is None else cascades)
        if not 1 <= k <= len(pool):
            raise InsufficientCascades(f"redundancy {k} needs between 1 and {len(pool)} cascades")

        if k == len(pool):
            chosen = pool
        else:
            picks = sorted(int(i) for i in self._choice_rng.choice(len(pool), size=k, replace=False))
            chosen = [pool[i] for i in picks]
        return [self.submit(user, tx, cascade) for cascade in chosen]

    # ------------------------------------------------------------------ cover

    def cover_routes(self, source: NetAddr) -> List[Tuple[MixNode, ...]]:
        """Routes a source may send cover on: full cascades for users, the downstream suffix for mixes."""
        if self.is_mix(source):
            node = self._nodes[source]
            return [self.cascades[node.cascade].nodes[node.position + 1:]]
        return [c.nodes for c in self.cascades]

    def emit_cover(self, source: NetAddr, rate: float, until: int, start: Optional[int] = None) -> Iterator[Tuple[int, CoverPacket]]:
        """Cover packets `source` emits at `rate` per tick until tick `until`."""
        instruction = Instruction.COVER_DECOY if self.cover_mode == 'decoy' else Instruction.COVER_DROP
        begin = self.scheduler.now if start is None else start
        return emit_cover(
            self.cover_routes(source), rate, self._cover_rng, begin, until, self._seal_rng, instruction
        )

    def start_cover(self, source: NetAddr, rate: float, until: int) -> int:
        """
        Schedule a source's cover traffic for the rest of the run.

        Returns:
            Number of cover packets scheduled
        """
        scheduled = 0
        for tick, packet in self.emit_cover(source, rate, until):
            node = self._nodes[packet.dest]
            flow = self._new_flow(None, node.cascade, source, cover=True, at=tick)
            tagged = CoverPacket(packet.dest, packet.layers_remaining, packet.body, flow.flow_id)
            self.scheduler.schedule(lambda p=tagged: self._transmit(source, p), tick)
            scheduled += 1
        if scheduled:
            logger.debug(f"[Mixnet] Scheduled {scheduled} cover packets from {source}")
        return scheduled

    @property
    def cover_packets(self) -> int:
        return sum(1 for f in self.flows.values() if f.cover)

    # -------------------------------------------------------------- transport

    def record_link(self, src: NetAddr, dst: NetAddr, size: Optional[int] = None) -> None:
        """Note a transmission on the wire and in both endpoints' observed sets."""
        self.network.observe_link(src, dst, self.frame_size if size is None else size)
        if self.is_mix(dst):
            self.observed[dst].add(src)
        if self.is_mix(src):
            self.observed[src].add(dst)

    def _new_flow(self, tx_id: Optional[str], cascade: int, source: NetAddr, cover: bool = False, at: Optional[int] = None) -> FlowRecord:
        flow = FlowRecord(len(self.flows), tx_id, cascade, source, self.scheduler.now if at is None else at, cover)
        self.flows[flow.flow_id] = flow
        return flow

    def _transmit(self, src: NetAddr, packet: LayeredPacket) -> None:
        self.record_link(src, packet.dest)
        mix = self._nodes[packet.dest]
        now = self.scheduler.now
        action = process(mix, packet, now, self._delay_rng)
        self.hop_log.record(
            'hop', time=now, mix=mix.id, flow=packet.flow_id, cover=packet.is_cover,
            action=type(action).__name__.lower(), at=action.at,
        )

        if isinstance(action, Forward):
            self.scheduler.schedule(lambda: self._transmit(mix.address, action.packet), action.at)
        elif isinstance(action, Broadcast):
            self.scheduler.schedule(lambda: self._exit_broadcast(mix, action, packet.flow_id), action.at)
        else:
            self._finish(packet.flow_id, action.reason, action.at, mix.address)

    def _exit_broadcast(self, mix: MixNode, action: Broadcast, flow_id: Optional[int]) -> None:
        self.observed[mix.address].add(P2P_ADDR)
        if action.is_decoy:
            self.network.decoy_broadcast(mix.address)
            self._finish(flow_id, 'decoy', self.scheduler.now, mix.address)
            return
        try:
            self.network.broadcast(mix.address, action.tx, channel='exit')
        except LedgerError as e:
            logger.warning(f"[Mixnet] Exit {mix.id} broadcast rejected: {e}")
            self._finish(flow_id, 'rejected', self.scheduler.now, mix.address)
            return
        self._finish(flow_id, 'broadcast', self.scheduler.now, mix.address)

    def _finish(self, flow_id: Optional[int], outcome: str, at: int, mix: NetAddr) -> None:
        flow = self.flows.get(flow_id)
        if flow is not None:
            flow.outcome = outcome
            flow.outcome_at = at
            flow.last_mix = mix

    # --------------------------------------------------------------- metrics

    def latencies(self) -> List[int]:
        """Added latency of every transaction submitted to the cascades and delivered."""
        return self.network.added_latencies(self.submitted)

    def expected_neighbourhoods(self) -> Dict[NetAddr, Set[NetAddr]]:
        """
        Addresses each mix must have exchanged packets with, from flow ground truth.

        A finished flow touches every mix from its first hop to the mix where it
        ended; an exit that broadcast (or tried to) also touched the P2P network.
        Flows still in flight contribute nothing.
        """
        expected: Dict[NetAddr, Set[NetAddr]] = defaultdict(set)
        for flow in self.flows.values():
            if flow.last_mix is None:
                continue
            nodes = self.cascades[flow.cascade].nodes
            start = self._nodes[flow.source].position + 1 if self.is_mix(flow.source) else 0
            end = self._nodes[flow.last_mix].position
            prev = flow.source
            for node in nodes[start:end + 1]:
                expected[node.address].add(prev)
                if self.is_mix(prev):
                    expected[prev].add(node.address)
                prev = node.address
            if flow.outcome in ('broadcast', 'decoy', 'rejected'):
                expected[flow.last_mix].add(P2P_ADDR)
        return expected

    def layer_isolation_violations(self, users: Iterable[NetAddr]) -> List[str]:
        """
        Mixes whose observed neighbourhood differs from what layering allows.

        A mix may only exchange packets with its predecessor (users, for an
        entry) and its successor, and must have exchanged packets with every
        neighbour its finished flows passed through.

        Args:
            users: All user network addresses

        Returns:
            Human-readable violations; empty when isolation holds
        """
        user_set = set(users)
        expected = self.expected_neighbourhoods()
        problems = []
        for cascade in self.cascades:
            for node in cascade.nodes:
                pred = cascade.predecessor(node)
                allowed = ({pred} if pred is not None else set(user_set)) | {cascade.successor(node)}
                observed = self.observed.get(node.address, set())
                extra = observed - allowed
                if extra:
                    problems.append(f"{node.id} handled {sorted(a.value for a in extra)}")
                missing = expected.get(node.address, set()) - observed
                if missing:
                    problems.append(f"{node.id} never exchanged packets with {sorted(a.value for a in missing)}")
        return problems

    def neighbourhood(self, address: NetAddr) -> FrozenSet[NetAddr]:
        """Every address a mix exchanged packets with during the run."""
        return frozenset(self.observed.get(address, set()))
