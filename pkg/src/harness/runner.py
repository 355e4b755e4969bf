"""Scenario execution: build the world, run the scheduler, collect the run."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from src.advisor.service import AdvisoryService
from src.ledger.ground_truth import GroundTruth
from src.ledger.ledger import AddressBook, Ledger
from src.ledger.models import PublicTxView, Transaction, ViewPolicy
from src.mixnet.cascade import MixNetwork
from src.network.p2p import BroadcastEvent, BroadcastNetwork, NetAddr
from src.network.scheduler import Scheduler
from src.utils.logger import HopLog

from .agents import UserAgent
from .workload import Workload, generate_workload


logger = logging.getLogger('zcash_mixsim')


@dataclass
class ScenarioRun:
    """Everything a completed run leaves behind, for reports and comparisons."""

    config: Dict[str, Any]
    scenario_id: str
    seed: int
    scheduler: Scheduler
    ledger: Ledger
    ground_truth: GroundTruth
    network: BroadcastNetwork
    workload: Workload
    agents: List[UserAgent]
    mixnet: Optional[MixNetwork] = None
    advisor: Optional[AdvisoryService] = None
    submitted: Dict[str, int] = field(default_factory=dict)

    @property
    def user_addrs(self) -> Dict[int, NetAddr]:
        return {agent.user: agent.address for agent in self.agents}

    def views(self) -> List[PublicTxView]:
        return self.ledger.views()

    def trace(self) -> List[BroadcastEvent]:
        return list(self.network.trace())

    def latencies(self) -> List[int]:
        """Added latency of every delivered transaction, direct or mixed."""
        return self.network.added_latencies(self.submitted)

    def delivery_rate(self) -> float:
        return self.network.delivery_rate(self.submitted)


class ScenarioRunner:
    """Builds and runs one scenario from a validated configuration."""

    def __init__(self, config: Dict[str, Any], out_dir: Optional[Path] = None):
        """
        Initialize the runner.

        Args:
            config: Complete, validated scenario configuration
            out_dir: Directory for the hop log; None keeps it in memory only
        """
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None

    def run(self) -> ScenarioRun:
        """
        Generate the workload, route it and drain the event queue.

        Returns:
            The completed ScenarioRun
        """
        scenario = self.config['scenario']
        seed = scenario['seed']
        duration = scenario['duration']
        logger.info(f"[Runner] Scenario '{scenario['id']}' seed={seed}")

        scheduler = Scheduler(seed)
        ledger = Ledger(ViewPolicy(self.config['ledger']['view_policy']))
        ground_truth = GroundTruth()
        ids = AddressBook(scheduler.rng('ids'))
        network = BroadcastNetwork(ledger, scheduler, ground_truth, ids)
        hop_log = HopLog(
            f"{scenario['id']}-{seed}",
            self.out_dir / 'hops.jsonl' if self.out_dir is not None else None
        )

        mix_config = self.config['mixnet']
        mixnet = MixNetwork(self.config, scheduler, network, hop_log) if mix_config['enabled'] else None
        advisor = AdvisoryService(self.config, ledger, scheduler.rng('advice'), mixnet, hop_log)

        workload = generate_workload(self.config, scheduler.rng('workload'), scheduler.rng('behavior'))

        run = ScenarioRun(
            config=self.config,
            scenario_id=scenario['id'],
            seed=seed,
            scheduler=scheduler,
            ledger=ledger,
            ground_truth=ground_truth,
            network=network,
            workload=workload,
            agents=[],
            mixnet=mixnet,
            advisor=advisor,
        )

        pending: Dict[str, Callable[[], None]] = {}
        network.on_applied(lambda tx, tick: self._confirm(pending, tx))
        submit = self._route(run)

        for plan in workload.users:
            agent = UserAgent(
                plan=plan,
                address=NetAddr(f"user-{plan.user}"),
                ids=ids,
                scheduler=scheduler,
                ground_truth=ground_truth,
                submit=submit,
                pending=pending,
                zz_hops=self.config['workload']['zz_hops'],
                advisor=advisor,
            )
            run.agents.append(agent)
            ground_truth.user_addrs[plan.user] = agent.address.value
            ledger.fund(agent.funding, plan.funding)

        directory = {agent.user: agent.receiving for agent in run.agents}
        for agent in run.agents:
            agent.directory = directory
            agent.start()

        if mixnet is not None:
            self._start_cover(mixnet, run.agents, duration)

        scheduler.run()
        ground_truth.sync_links(ledger)
        hop_log.close()

        logger.info(
            f"[Runner] Done at t={scheduler.now}: {len(ledger)} txs applied, "
            f"{len(network.trace())} broadcast events"
        )
        return run

    @staticmethod
    def _confirm(pending: Dict[str, Callable[[], None]], tx: Transaction) -> None:
        continuation = pending.pop(tx.id, None)
        if continuation is not None:
            continuation()

    def _route(self, run: ScenarioRun) -> Callable[[NetAddr, Transaction], None]:
        """The path user transactions take: direct broadcast or redundant mixing."""
        redundancy = self.config['mixnet']['redundancy']

        def submit(user: NetAddr, tx: Transaction) -> None:
            rejection = run.ledger.validate(tx)
            if rejection is not None:
                raise rejection
            run.submitted.setdefault(tx.id, run.scheduler.now)
            if run.mixnet is not None:
                run.mixnet.send_redundant(user, tx, redundancy)
            else:
                run.network.direct_broadcast(user, tx, run.scheduler.now)

        return submit

    def _start_cover(self, mixnet: MixNetwork, agents: List[UserAgent], duration: int) -> None:
        mix_config = self.config['mixnet']
        total = 0
        if mix_config['cover_rate'] > 0:
            for agent in agents:
                total += mixnet.start_cover(agent.address, mix_config['cover_rate'], duration)
        if mix_config['mix_cover_rate'] > 0:
            for cascade in mixnet.cascades:
                for node in cascade.nodes:
                    total += mixnet.start_cover(node.address, mix_config['mix_cover_rate'], duration)
        if total:
            logger.info(f"[Runner] Scheduled {total} cover packets")
