"""Tests for workload generation, scenario runs, reports, sweeps and the CLI."""

import json

import pandas as pd
import pytest
import yaml

from src.advisor.evaluation import MismatchedBaseline
from src.harness.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from src.harness.report import MetricsReport, ReportFormatError, build_report, compare, run_scenario
from src.harness.runner import ScenarioRunner
from src.harness.sweep import PARAMETERS, is_monotone_nonincreasing, parse_vary, point_config, run_sweep
from src.harness.workload import ADVISED, NAIVE, generate_workload
from src.network.scheduler import Scheduler
from src.utils.config import ConfigurationError, deep_merge
from src.utils.logger import SimLogger

from conftest import QUIET, scenario


SMALL = {
    'scenario': {'id': 'small', 'seed': 21, 'duration': 20_000},
    'workload': {'users': 20, 'values': {'min_zec': 1, 'max_zec': 1000, 'unique': True}},
}


def small(overrides=None):
    return scenario(deep_merge(SMALL, overrides or {}))


def workload_for(config):
    scheduler = Scheduler(config['scenario']['seed'])
    return generate_workload(config, scheduler.rng('workload'), scheduler.rng('behavior'))


# ----------------------------------------------------------------- workload

def test_behavior_split_does_not_change_values():
    naive = workload_for(small())
    mixed = workload_for(small({'behavior': {'naive': 0.5, 'advised': 0.5}}))
    assert naive.digest == mixed.digest
    assert [d.amount for d in naive.deposits] == [d.amount for d in mixed.deposits]
    assert {u.behavior for u in naive.users} == {NAIVE}
    assert sum(1 for u in mixed.users if u.behavior == ADVISED) == 10


def test_unique_values_are_distinct():
    amounts = [d.amount for d in workload_for(small()).deposits]
    assert len(set(amounts)) == len(amounts) == 20


def test_unique_draws_give_up_on_tiny_ranges():
    config = small({'workload': {'users': 2, 'values': {'kind': 'choice', 'choices_zec': [1]}}})
    with pytest.raises(ConfigurationError, match='unique'):
        workload_for(config)


def test_think_times_cover_every_hop():
    plan = workload_for(small({'workload': {'zz_hops': 2, 'deposits_per_user': 2}})).deposits
    assert len(plan) == 40
    assert all(len(d.think_times) == 2 and all(len(row) == 3 for row in d.think_times) for d in plan)


def test_payments_go_to_other_users():
    workload = workload_for(small({'workload': {'transparent_payments': 2}}))
    for user in workload.users:
        assert len(user.payments) == 2
        assert all(p.recipient != user.user for p in user.payments)


# ---------------------------------------------------------------- scenarios

@pytest.fixture(scope='module')
def naive_report():
    return run_scenario(small())


def test_naive_run_is_fully_linked(naive_report):
    assert naive_report.value_attack.precision == 1.0
    assert naive_report.value_attack.recall == 1.0
    assert naive_report.network_attack.recall == 1.0
    assert naive_report.delivery_rate == 1.0
    assert naive_report.mean_latency == 0.0
    assert naive_report.counts['real_txs'] == 40
    assert naive_report.counts['direct_broadcasts'] == 40
    assert all(naive_report.invariants.values())


def test_trace_accounts_for_every_broadcast():
    run = ScenarioRunner(small({
        'scenario': {'id': 'trace', 'seed': 13},
        'mixnet': {'enabled': True, 'cascades': 2, 'redundancy': 2, 'cover_rate': 0.001, 'cover_mode': 'decoy'},
    })).run()
    counts = build_report(run).counts

    assert counts['trace_length'] == counts['direct_broadcasts'] + counts['exit_broadcasts'] + counts['cover_broadcasts']
    assert counts['direct_broadcasts'] == 0
    assert counts['cover_broadcasts'] > 0
    assert counts['applied_txs'] == counts['real_txs'] == 40
    assert counts['duplicate_broadcasts'] == counts['applied_txs']
    assert counts['exit_broadcasts'] == 2 * counts['applied_txs']

    real = run.ground_truth.user_originated()
    first_seen = []
    for event in run.network.trace():
        if event.view.tx_id in real and event.view.tx_id not in first_seen:
            first_seen.append(event.view.tx_id)
    assert sorted(first_seen) == sorted(tx.id for tx in run.ledger.transactions)
    assert all(run.network.first_broadcast_tick(tx_id) is not None for tx_id in first_seen)


def test_zz_hops_keep_links():
    report = run_scenario(small({'workload': {'zz_hops': 2}}))
    assert report.counts['applied_txs'] == 80
    assert report.value_attack.recall == 1.0


def test_disabled_attacks_are_absent():
    report = run_scenario(small({'adversary': {'value_attack': False, 'network_attack': False}}))
    assert report.value_attack is None and report.network_attack is None
    assert 'value.recall' not in report.metrics()
    assert len(report.to_frame()) == 1


def test_report_files_round_trip(naive_report, tmp_path):
    naive_report.write(tmp_path)
    assert MetricsReport.load(tmp_path) == naive_report
    assert MetricsReport.load(tmp_path / 'report.json') == naive_report
    frame = pd.read_csv(tmp_path / 'report.csv')
    assert list(frame['attack']) == ['value', 'network']
    assert set(frame['scenario']) == {'small'}


def test_loading_a_non_report_fails(tmp_path):
    (tmp_path / 'report.json').write_text('{"seed": 1}')
    with pytest.raises(ReportFormatError):
        MetricsReport.load(tmp_path)
    with pytest.raises(ReportFormatError):
        MetricsReport.load(tmp_path / 'missing.json')


def test_identical_reports_have_zero_deltas(naive_report):
    delta = compare(naive_report, naive_report)
    assert delta.deltas
    assert all(d.delta == 0 for d in delta.deltas.values())
    assert delta.regressions == []


def test_compare_needs_matching_seed(naive_report):
    other = run_scenario(small({'scenario': {'seed': 22}}))
    with pytest.raises(MismatchedBaseline):
        compare(naive_report, other)


def test_mixnet_adds_one_delay_per_hop():
    mixed = run_scenario(small({
        'scenario': {'id': 'mixed'},
        'workload': {'users': 100},
        'mixnet': {'enabled': True, 'length': 3, 'mean_delay': 50},
    }))
    baseline = run_scenario(small({'workload': {'users': 100}}))
    delta = compare(baseline, mixed)
    assert delta.deltas['latency.mean'].delta == pytest.approx(150, rel=0.2)
    assert delta.deltas['latency.mean'].regression
    assert not delta.deltas['network.recall'].regression
    assert 'network.recall' not in delta.regressions


# ------------------------------------------------------------------- sweeps

def test_lambda_range_has_eleven_points():
    parameter, values = parse_vary('lambda=0:0.05:0.005')
    assert parameter.path == 'mixnet.cover_rate'
    assert len(values) == 11
    assert values[0] == 0.0 and values[-1] == 0.05


def test_integer_parameters_parse_to_ints():
    _, values = parse_vary('k=1:3:1')
    assert values == [1, 2, 3]
    assert all(isinstance(v, int) for v in values)


@pytest.mark.parametrize('vary', ['nope=0:1:1', 'lambda', 'lambda=0:1', 'lambda=a:b:c', 'lambda=1:0:0.1', 'lambda=0:1:0', 'k=1:2:0.5'])
def test_bad_ranges_are_config_errors(vary):
    with pytest.raises(ConfigurationError):
        parse_vary(vary)


def test_advised_point_rebalances_behavior():
    config = point_config(small(), PARAMETERS['advised'], 0.3)
    assert config['behavior'] == {'naive': 0.7, 'advised': 0.3}
    assert config['mixnet']['enabled'] is False
    assert config['scenario']['id'] == 'small-advised=0.3'


def test_monotone_check():
    assert is_monotone_nonincreasing([1.0, 1.0, 0.5, None, 0.2])
    assert not is_monotone_nonincreasing([0.1, 0.2])
    assert is_monotone_nonincreasing([])


def test_redundancy_sweep(tmp_path):
    base = small({'workload': {'users': 5}, 'mixnet': {'cascades': 2}})
    result = run_sweep(base, 'k=1:2:1')
    assert [row['value'] for row in result.rows] == [1, 2]
    assert all(row['delivery_rate'] == 1.0 for row in result.rows)
    result.write(tmp_path)
    assert len(pd.read_csv(tmp_path / 'sweep.csv')) == 2
    summary = json.loads((tmp_path / 'sweep.json').read_text())
    assert summary['parameter'] == 'k'
    assert summary['advantage_metric'] == 'network.guess_probability'


def test_sweep_beyond_cascades_is_config_error():
    with pytest.raises(ConfigurationError, match='mixnet.redundancy'):
        run_sweep(small({'mixnet': {'cascades': 2}}), 'k=1:3:1')


# ---------------------------------------------------------------------- CLI

@pytest.fixture
def cli_env(tmp_path, monkeypatch):
    monkeypatch.setattr(SimLogger, '_instance', None)
    monkeypatch.setenv('MIXSIM_LOG_FILE', str(tmp_path / 'logs' / 'cli.log'))
    monkeypatch.setenv('LOG_LEVEL', 'WARNING')
    return tmp_path


def write_scenario(path, overrides=None):
    path.write_text(yaml.safe_dump(deep_merge(deep_merge(SMALL, QUIET), overrides or {})))
    return path


def test_cli_run_writes_outputs(cli_env, capsys):
    config = write_scenario(cli_env / 'small.yaml')
    out = cli_env / 'run'
    assert main(['run', '--config', str(config), '--seed', '3', '--out', str(out)]) == EXIT_OK
    for name in ('report.json', 'report.csv', 'views.jsonl', 'ground_truth.jsonl', 'trace.jsonl', 'hops.jsonl'):
        assert (out / name).exists(), name
    printed = json.loads(capsys.readouterr().out)
    assert printed['seed'] == 3
    assert MetricsReport.load(out).seed == 3


def test_cli_bad_config_exits_with_config_code(cli_env, capsys):
    config = write_scenario(cli_env / 'bad.yaml', {'workload': {'users': 0}})
    assert main(['run', '--config', str(config), '--out', str(cli_env / 'run')]) == EXIT_CONFIG
    assert 'workload.users' in capsys.readouterr().err


def test_cli_missing_config(cli_env):
    assert main(['run', '--config', str(cli_env / 'absent.yaml'), '--out', str(cli_env / 'run')]) == EXIT_CONFIG


def test_cli_rejects_negative_seed(cli_env):
    with pytest.raises(SystemExit) as excinfo:
        main(['run', '--seed', '-1', '--out', str(cli_env / 'run')])
    assert excinfo.value.code == 2


def test_cli_compare(cli_env, capsys):
    config = write_scenario(cli_env / 'small.yaml')
    for seed in ('3', '4'):
        assert main(['run', '--config', str(config), '--seed', seed, '--out', str(cli_env / seed)]) == EXIT_OK

    out = cli_env / 'delta'
    assert main(['compare', '--baseline', str(cli_env / '3'), '--treatment', str(cli_env / '3'), '--out', str(out)]) == EXIT_OK
    delta = json.loads((out / 'delta.json').read_text())
    assert delta['regressions'] == []
    assert (out / 'delta.csv').exists()

    capsys.readouterr()
    assert main(['compare', '--baseline', str(cli_env / '3'), '--treatment', str(cli_env / '4')]) == EXIT_FAILURE
    assert 'seeds differ' in capsys.readouterr().err


def test_cli_sweep_bad_vary(cli_env):
    config = write_scenario(cli_env / 'small.yaml')
    assert main(['sweep', '--config', str(config), '--vary', 'gamma=0:1:1', '--out', str(cli_env / 'sweep')]) == EXIT_CONFIG
