"""Metrics reports, comparisons between runs, and their JSON/CSV output."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.adversary.network_linker import link_by_network
from src.adversary.scoring import AttackScore, score
from src.adversary.value_linker import link_by_value
from src.advisor.evaluation import MismatchedBaseline
from src.ledger.ground_truth import TxRole

from .runner import ScenarioRun, ScenarioRunner


logger = logging.getLogger('zcash_mixsim')


class HarnessError(Exception):
    """Base class for harness errors."""
    pass


class ReportFormatError(HarnessError):
    """A report file is missing fields or is not valid JSON."""
    pass


# +1: higher is better for users, -1: lower is better, 0: informational
DIRECTIONS: Dict[str, int] = {
    'precision': -1,
    'recall': -1,
    'mean_anonymity_set': 1,
    'median_anonymity_set': 1,
    'mean_entropy': 1,
    'guess_probability': -1,
    'delivery_rate': 1,
    'latency.mean': -1,
    'latency.p95': -1,
}


def _direction(metric: str) -> int:
    return DIRECTIONS.get(metric, DIRECTIONS.get(metric.split('.', 1)[-1], 0))


@dataclass
class MetricsReport:
    """Per-scenario result; deterministic given (config, seed)."""

    scenario_id: str
    seed: int
    workload_digest: str
    value_attack: Optional[AttackScore] = None
    network_attack: Optional[AttackScore] = None
    delivery_rate: float = 1.0
    mean_latency: float = 0.0
    p95_latency: float = 0.0
    cover_packets: int = 0
    cover_broadcasts: int = 0
    counts: Dict[str, int] = field(default_factory=dict)
    advice: Dict[str, int] = field(default_factory=dict)
    invariants: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scenario_id': self.scenario_id,
            'seed': self.seed,
            'workload_digest': self.workload_digest,
            'value_attack': self.value_attack.to_dict() if self.value_attack else None,
            'network_attack': self.network_attack.to_dict() if self.network_attack else None,
            'delivery_rate': self.delivery_rate,
            'mean_latency': self.mean_latency,
            'p95_latency': self.p95_latency,
            'cover_packets': self.cover_packets,
            'cover_broadcasts': self.cover_broadcasts,
            'counts': dict(self.counts),
            'advice': dict(self.advice),
            'invariants': dict(self.invariants),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MetricsReport':
        value = data.get('value_attack')
        network = data.get('network_attack')
        return cls(
            scenario_id=data['scenario_id'],
            seed=data['seed'],
            workload_digest=data['workload_digest'],
            value_attack=AttackScore.from_dict(value) if value else None,
            network_attack=AttackScore.from_dict(network) if network else None,
            delivery_rate=data['delivery_rate'],
            mean_latency=data['mean_latency'],
            p95_latency=data['p95_latency'],
            cover_packets=data['cover_packets'],
            cover_broadcasts=data['cover_broadcasts'],
            counts=data.get('counts', {}),
            advice=data.get('advice', {}),
            invariants=data.get('invariants', {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def load(cls, path: Path) -> 'MetricsReport':
        """
        Read a report.json, or the report.json inside a run directory.

        Raises:
            ReportFormatError: If the file is missing or not a report
        """
        path = Path(path)
        if path.is_dir():
            path = path / 'report.json'
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError:
            raise ReportFormatError(f"Report not found: {path}")
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ReportFormatError(f"Not a metrics report: {path} ({e})")

    def metrics(self) -> Dict[str, float]:
        """Flat numeric metrics, named `<attack>.<field>` for attack scores."""
        flat: Dict[str, float] = {}
        for score_ in (self.value_attack, self.network_attack):
            if score_ is None:
                continue
            for key in ('precision', 'recall', 'mean_anonymity_set', 'median_anonymity_set',
                        'mean_entropy', 'guess_probability'):
                flat[f"{score_.attack}.{key}"] = getattr(score_, key)
        if self.network_attack is not None:
            flat['network.unattributed'] = self.network_attack.unattributed
        flat['delivery_rate'] = self.delivery_rate
        flat['latency.mean'] = self.mean_latency
        flat['latency.p95'] = self.p95_latency
        flat['cover.packets'] = self.cover_packets
        flat['cover.broadcasts'] = self.cover_broadcasts
        return flat

    def to_frame(self) -> pd.DataFrame:
        """One CSV row per attack, keyed by (scenario, seed, attack), with run-level columns."""
        run_level = {
            'delivery_rate': self.delivery_rate,
            'mean_latency': self.mean_latency,
            'p95_latency': self.p95_latency,
            'cover_packets': self.cover_packets,
            'cover_broadcasts': self.cover_broadcasts,
        }
        rows = [
            {**s.csv_row(self.scenario_id, self.seed), **run_level}
            for s in (self.value_attack, self.network_attack) if s is not None
        ]
        if not rows:
            rows = [{'scenario': self.scenario_id, 'seed': self.seed, **run_level}]
        return pd.DataFrame(rows)

    def write(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / 'report.json').write_text(self.to_json() + '\n', encoding='utf-8')
        self.to_frame().to_csv(out_dir / 'report.csv', index=False)


@dataclass(frozen=True)
class MetricDelta:
    baseline: float
    treatment: float
    delta: float
    regression: bool


@dataclass
class DeltaReport:
    baseline_id: str
    treatment_id: str
    seed: int
    deltas: Dict[str, MetricDelta]

    @property
    def regressions(self) -> List[str]:
        return sorted(name for name, d in self.deltas.items() if d.regression)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'baseline': self.baseline_id,
            'treatment': self.treatment_id,
            'seed': self.seed,
            'deltas': {
                name: {'baseline': d.baseline, 'treatment': d.treatment, 'delta': d.delta, 'regression': d.regression}
                for name, d in sorted(self.deltas.items())
            },
            'regressions': self.regressions,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {'metric': name, 'baseline': d.baseline, 'treatment': d.treatment,
             'delta': d.delta, 'regression': d.regression}
            for name, d in sorted(self.deltas.items())
        ])


def compare(baseline: MetricsReport, treatment: MetricsReport) -> DeltaReport:
    """
    Per-metric deltas (treatment - baseline), flagging moves in the bad direction.

    Raises:
        MismatchedBaseline: If seed or workload digest differ
    """
    if baseline.seed != treatment.seed:
        raise MismatchedBaseline(f"seeds differ: {baseline.seed} != {treatment.seed}")
    if baseline.workload_digest != treatment.workload_digest:
        raise MismatchedBaseline("workload values differ between the two reports")

    before = baseline.metrics()
    after = treatment.metrics()
    deltas = {}
    for name in sorted(set(before) & set(after)):
        delta = after[name] - before[name]
        direction = _direction(name)
        deltas[name] = MetricDelta(before[name], after[name], delta, direction * delta < 0)
    return DeltaReport(baseline.scenario_id, treatment.scenario_id, baseline.seed, deltas)


def build_report(run: ScenarioRun) -> MetricsReport:
    """
    Run the enabled attacks over a completed run and aggregate its metrics.

    Args:
        run: Completed ScenarioRun

    Returns:
        MetricsReport
    """
    adversary = run.config['adversary']
    value_score = None
    network_score = None
    if adversary['value_attack']:
        value_score = score(link_by_value(run.views()), run.ground_truth)
    if adversary['network_attack']:
        _, network_score = link_by_network(
            run.network.trace(), run.ground_truth, run.network.wire_log(), adversary['activity_window']
        )

    latencies = run.latencies()
    channels = run.network.channel_counts
    deposits = run.ground_truth.by_role(TxRole.DEPOSIT)
    applied = {entry.tx.id for entry in run.ledger.entries}
    isolation = run.mixnet.layer_isolation_violations(run.user_addrs.values()) if run.mixnet else []

    report = MetricsReport(
        scenario_id=run.scenario_id,
        seed=run.seed,
        workload_digest=run.workload.digest,
        value_attack=value_score,
        network_attack=network_score,
        delivery_rate=run.delivery_rate(),
        mean_latency=float(np.mean(latencies)) if latencies else 0.0,
        p95_latency=float(np.percentile(latencies, 95)) if latencies else 0.0,
        cover_packets=run.mixnet.cover_packets if run.mixnet else 0,
        cover_broadcasts=channels['cover'],
        counts={
            'real_txs': len(run.submitted),
            'applied_txs': len(applied),
            'trace_length': len(run.network.trace()),
            'direct_broadcasts': channels['direct'],
            'exit_broadcasts': channels['exit'],
            'cover_broadcasts': channels['cover'],
            'duplicate_broadcasts': run.ground_truth.duplicate_events,
        },
        advice={
            'advised_deposits': sum(1 for r in deposits if r.advised),
            'fallback_deposits': sum(1 for r in deposits if r.fallback),
        },
        invariants={
            'conservation': not run.ledger.verify_prefixes(),
            'no_theft': applied <= run.ground_truth.user_originated(),
            'layer_isolation': not isolation,
        },
    )
    for problem in isolation:
        logger.warning(f"[Report] Layer isolation: {problem}")
    return report


def write_outputs(run: ScenarioRun, report: MetricsReport, out_dir: Path) -> None:
    """Write the report plus views, ground truth and trace next to the hop log."""
    out_dir = Path(out_dir)
    report.write(out_dir)
    run.ledger.write_views(out_dir / 'views.jsonl')
    run.ground_truth.write(out_dir / 'ground_truth.jsonl')
    run.network.write_trace(out_dir / 'trace.jsonl')
    logger.info(f"[Report] Wrote results to {out_dir}")


def run_scenario(config: Dict[str, Any], out_dir: Optional[Path] = None) -> MetricsReport:
    """
    Full pipeline: workload, routing, attacks, report.

    Args:
        config: Complete, validated scenario configuration
        out_dir: Where to write outputs; None writes nothing

    Returns:
        MetricsReport
    """
    run = ScenarioRunner(config, out_dir).run()
    report = build_report(run)
    if out_dir is not None:
        write_outputs(run, report, out_dir)
    return report
