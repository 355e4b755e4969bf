"""End-to-end checks of the simulator's headline properties."""

import json
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.adversary.network_linker import link_by_network
from src.adversary.value_linker import candidate_set_sizes, exhaustive_value_links
from src.advisor.evaluation import evaluate_advice, mean_set_sizes
from src.advisor.histogram import DepositHistogram, build_histogram
from src.advisor.split_advisor import exhaustive_best_split, recommend_split
from src.harness.report import build_report, run_scenario
from src.harness.runner import ScenarioRunner
from src.harness.sweep import run_sweep
from src.ledger.ground_truth import TxRole
from src.ledger.models import Amount, TxKind
from src.network.p2p import NetAddr, P2P_ADDR
from src.utils.config import ConfigLoader

from conftest import World, scenario, zec


SCENARIOS = Path(__file__).resolve().parent.parent / 'scenarios'
GRID = zec('0.01')


def load_scenario(name: str):
    return ConfigLoader(str(SCENARIOS / name)).load({'logging.console_output': False, 'logging.level': 'WARNING'})


def test_naive_unique_users_are_all_linked():
    config = scenario({'scenario': {'id': 'naive', 'seed': 2}, 'workload': {'users': 100, 'values': {'unique': True}}})
    started = time.perf_counter()
    report = run_scenario(config)
    elapsed = time.perf_counter() - started

    assert report.value_attack.precision == 1.0
    assert report.value_attack.recall == 1.0
    assert report.value_attack.truth == 100
    assert elapsed < 5.0


def test_advice_enlarges_anonymity_sets(advice_runs):
    baseline, treatment = advice_runs
    after, before = mean_set_sizes(evaluate_advice(treatment, baseline))
    assert after > before

    views = treatment.ledger.views()
    sizes = candidate_set_sizes(exhaustive_value_links(views))
    position = {view.tx_id: i for i, view in enumerate(views)}
    withdrawals = {}
    for deposit, withdrawal in treatment.ground_truth.links:
        withdrawals.setdefault(deposit, []).append(withdrawal)

    checked = 0
    for record in treatment.ground_truth.by_role(TxRole.DEPOSIT):
        if not record.advised:
            continue
        tx = treatment.ledger.transaction(record.tx_id)
        prefix = build_histogram(views[:position[record.tx_id]], exclude_consumed=True)
        if not all(prefix.count(amount) >= 1 for _, amount in tx.outputs):
            continue
        checked += 1
        for withdrawal in withdrawals.get(record.tx_id, []):
            assert sizes[withdrawal] >= 2, (record.tx_id, withdrawal)
    assert checked > 0


@pytest.mark.slow
def test_advice_matches_exhaustive_search_over_random_histograms():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        units = int(rng.integers(2, 10_001))
        keys = rng.integers(1, units, size=int(rng.integers(0, 40)))
        counts = rng.integers(1, 8, size=len(keys))
        hist = DepositHistogram({Amount(int(k) * GRID.zatoshi): int(c) for k, c in zip(keys, counts)})
        amount = Amount(units * GRID.zatoshi)

        advice = recommend_split(amount, hist, GRID)
        best = exhaustive_best_split(amount, hist, GRID)
        if best is None:
            assert advice.fallback
        else:
            assert advice.score == best[2]
            assert advice.parts == best[:2]


def test_mix_exits_hide_every_sender():
    config = scenario({
        'scenario': {'id': 'mixed', 'seed': 4},
        'workload': {'users': 40},
        'mixnet': {'enabled': True, 'cascades': 2, 'length': 3},
    })
    run = ScenarioRunner(config).run()
    trace = run.network.trace()

    assert trace
    assert {event.origin for event in trace} <= run.mixnet.exit_addresses
    _, network = link_by_network(trace, run.ground_truth, run.network.wire_log())
    assert network.recall == 0.0


def test_each_mix_sees_only_its_neighbours():
    config = scenario({
        'scenario': {'id': 'isolation', 'seed': 5, 'duration': 10_000},
        'workload': {'users': 30, 'tx_rate': 0.001},
        'mixnet': {'enabled': True, 'length': 3, 'cover_rate': 0.001, 'mix_cover_rate': 0.002},
    })
    run = ScenarioRunner(config).run()
    users = set(run.user_addrs.values())
    entry, middle, exit_ = run.mixnet.cascades[0].nodes

    assert run.mixnet.neighbourhood(middle.address) == {entry.address, exit_.address}
    assert run.mixnet.neighbourhood(exit_.address) == {middle.address, P2P_ADDR}
    seen_by_entry = run.mixnet.neighbourhood(entry.address)
    assert middle.address in seen_by_entry
    assert seen_by_entry - {middle.address} <= users
    assert run.mixnet.layer_isolation_violations(users) == []


@pytest.mark.parametrize('name', ['naive.yaml', 'advised.yaml', 'mixnet.json', 'redundancy.yaml', 'cover.yaml'])
def test_ledger_holds_only_user_transactions(name):
    run = ScenarioRunner(load_scenario(name)).run()
    applied = {tx.id for tx in run.ledger.transactions}
    assert applied
    assert applied <= run.ground_truth.user_originated()
    assert build_report(run).invariants['no_theft']


def test_redundancy_outlives_a_dropper():
    world = World(scenario({'mixnet': {'enabled': True, 'cascades': 3, 'length': 3, 'droppers': [[0, 1]]}}))
    dropper = world.mixnet.cascades[0]
    source = world.funded(zec(2000))
    redundant = [world.payment(source, zec(1)) for _ in range(1000)]
    single = [world.payment(source, zec(1)) for _ in range(1000)]

    user = NetAddr('user-0')
    for tx in redundant:
        world.mixnet.send_redundant(user, tx, 2)
    for tx in single:
        world.mixnet.send_redundant(user, tx, 1, cascades=[dropper])
    world.scheduler.run()

    assert sum(world.ledger.contains(tx.id) for tx in redundant) == 1000
    assert sum(world.ledger.contains(tx.id) for tx in single) == 0
    assert {tx.id for tx in world.ledger.transactions} <= world.truth.user_originated()


@pytest.mark.slow
def test_latency_is_length_times_mean_delay():
    world = World(scenario({'mixnet': {'enabled': True, 'length': 3, 'mean_delay': 50}}))
    source = world.funded(Amount(10 ** 6))
    for _ in range(10_000):
        world.mixnet.send_redundant(NetAddr('user-0'), world.payment(source, Amount(1)), 1)
    world.scheduler.run()
    latencies = world.mixnet.latencies()
    assert len(latencies) == 10_000
    assert abs(np.mean(latencies) - 150) <= 0.10 * 150


def test_runs_are_conserving_and_reproducible(tmp_path):
    config = scenario({
        'scenario': {'id': 'repro', 'seed': 13, 'duration': 10_000},
        'workload': {'users': 25, 'zz_hops': 1, 'transparent_payments': 1},
        'behavior': {'naive': 0.6, 'advised': 0.4},
        'mixnet': {'enabled': True, 'cascades': 2, 'redundancy': 2, 'cover_rate': 0.001},
    })
    first = run_scenario(config, tmp_path / 'first')
    second = run_scenario(config, tmp_path / 'second')

    assert first.invariants['conservation'] and second.invariants['conservation']
    for name in ('report.json', 'report.csv', 'views.jsonl', 'ground_truth.jsonl', 'trace.jsonl', 'hops.jsonl'):
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes(), name

    views = [json.loads(line) for line in (tmp_path / 'first' / 'views.jsonl').read_text().splitlines()]
    assert {v['kind'] for v in views} >= {TxKind.TZ.value, TxKind.ZZ.value, TxKind.ZT.value, TxKind.TT.value}


@pytest.mark.slow
def test_cover_sweep_writes_advantage_curve(tmp_path):
    base = scenario({
        'scenario': {'id': 'cover', 'seed': 3, 'duration': 5000},
        'workload': {'users': 10, 'tx_rate': 0.001},
        'mixnet': {'enabled': True, 'cascades': 2, 'cover_mode': 'decoy'},
    })
    result = run_sweep(base, 'lambda=0:0.05:0.005')
    result.write(tmp_path)

    frame = pd.read_csv(tmp_path / 'sweep.csv')
    assert len(frame) == 11
    assert list(frame['value']) == pytest.approx([i * 0.005 for i in range(11)])
    assert frame['advantage'].notna().all()
    summary = json.loads((tmp_path / 'sweep.json').read_text())
    assert isinstance(summary['monotone_nonincreasing'], bool)
    assert summary['monotone_nonincreasing'] == result.monotone
