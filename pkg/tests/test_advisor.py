"""Tests for the deposit histogram, the split advisor and the advice evaluation."""

import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.advisor.evaluation import MismatchedBaseline, evaluate_advice, mean_set_sizes
from src.advisor.histogram import DepositHistogram, build_histogram
from src.advisor.service import AdvisoryService
from src.advisor.split_advisor import (
    AmountTooSmall,
    SplitRecommendation,
    exhaustive_best_split,
    fallback_split,
    recommend_split,
    split_score,
)
from src.harness.runner import ScenarioRunner
from src.ledger.models import Amount
from src.network.p2p import NetAddr
from src.utils.logger import HopLog

from conftest import Pool, World, scenario, zec


UNIT = Amount(1)


def hist_of(counts):
    return DepositHistogram({Amount(v): c for v, c in counts.items()})


histograms = st.dictionaries(st.integers(1, 60), st.integers(1, 6), max_size=25).map(hist_of)


# ---------------------------------------------------------------- histogram

def test_histogram_counts_exact_values(pool):
    for at, value in enumerate((3, 3, 7), start=1):
        pool.deposit(zec(value), at)
    hist = build_histogram(pool.ledger.views())
    assert hist.to_dict() == {zec(3).zatoshi: 2, zec(7).zatoshi: 1}
    assert hist.total == 3


def test_empty_ledger_gives_empty_histogram():
    hist = build_histogram([])
    assert len(hist) == 0
    assert hist.count(zec(1)) == 0


def test_histogram_matches_recount():
    pool = Pool(seed=8)
    rng = np.random.default_rng(8)
    drawn = []
    for at in range(1, 201):
        first, second = (int(v) for v in rng.integers(1, 20, size=2))
        if rng.random() < 0.5:
            second = 0
        pool.deposit(Amount(first), at, second=Amount(second))
        drawn.extend(v for v in (first, second) if v)
    expected = Counter(Amount(v) for v in drawn)
    assert build_histogram(pool.ledger.views()).counts == dict(expected)


def test_histogram_can_exclude_linked_outputs(pool):
    _, z1, _ = pool.deposit(zec(4), 1)
    pool.withdraw(z1, zec(4), 2)
    pool.deposit(zec(4), 3)
    views = pool.ledger.views()
    assert build_histogram(views).count(zec(4)) == 2
    assert build_histogram(views, exclude_consumed=True).count(zec(4)) == 1


# ---------------------------------------------------------------- splitting

def test_splits_into_two_earlier_deposit_values(pool):
    x1, x2 = zec(2), zec(5)
    pool.deposit(x1, 1)
    pool.deposit(x2, 2)
    advice = recommend_split(x1 + x2, build_histogram(pool.ledger.views()))
    assert advice.parts == (x1, x2)
    assert advice.score == 1
    assert not advice.fallback


def test_empty_history_falls_back_to_denomination():
    advice = recommend_split(zec(10), DepositHistogram())
    assert advice.fallback
    assert advice.parts == (zec(1), zec(9))


def test_fallback_without_fitting_denomination_halves():
    assert fallback_split(Amount(7), DepositHistogram()) == (Amount(3), Amount(4))


def test_fallback_prefers_common_denomination():
    hist = DepositHistogram({zec('0.1'): 4, zec(1): 1})
    assert fallback_split(zec(10), hist) == (zec('0.1'), zec('9.9'))


def test_fallback_halves_on_the_grid():
    advice = recommend_split(zec('0.15'), DepositHistogram(), grid=zec('0.01'))
    assert advice.fallback
    assert advice.parts == (zec('0.07'), zec('0.08'))


def test_fallback_ignores_denominations_off_the_grid():
    hist = DepositHistogram({zec('0.1'): 4, zec(1): 1})
    assert fallback_split(zec(10), hist, grid=zec(1)) == (zec(1), zec(9))
    assert fallback_split(zec(1), hist, grid=zec(1)) == (zec('0.5'), zec('0.5'))


def test_best_split_by_min_count():
    advice = recommend_split(Amount(7), hist_of({3: 5, 4: 2, 7: 9}), grid=UNIT)
    assert advice.parts == (Amount(3), Amount(4))
    assert advice.score == 2


def test_ties_prefer_larger_count_sum_then_smaller_part():
    hist = hist_of({1: 2, 9: 2, 4: 2, 6: 3})
    assert recommend_split(Amount(10), hist, grid=UNIT).parts == (Amount(4), Amount(6))
    hist = hist_of({1: 2, 9: 2, 4: 2, 6: 2})
    assert recommend_split(Amount(10), hist, grid=UNIT).parts == (Amount(1), Amount(9))


def test_sum_log_objective_ranks_by_product():
    hist = hist_of({2: 1, 8: 9, 4: 2, 6: 2})
    assert recommend_split(Amount(10), hist, grid=UNIT).parts == (Amount(4), Amount(6))
    advice = recommend_split(Amount(10), hist, grid=UNIT, objective='sum_log_count')
    assert advice.parts == (Amount(2), Amount(8))
    assert advice.score == pytest.approx(np.log(9))


def test_off_grid_parts_are_skipped():
    hist = hist_of({3: 5, 4: 5})
    advice = recommend_split(Amount(7), hist, grid=Amount(2))
    assert advice.fallback


@pytest.mark.parametrize('value', [0, 1])
def test_amount_too_small(value):
    with pytest.raises(AmountTooSmall):
        recommend_split(Amount(value), DepositHistogram())


def test_recommendation_rejects_zero_part():
    with pytest.raises(ValueError):
        SplitRecommendation(zec(1), (Amount(0), zec(1)), 0)


@given(histograms, st.integers(2, 120), st.sampled_from(['min_count', 'sum_log_count']))
@settings(max_examples=300, deadline=None)
def test_recommendation_matches_exhaustive_search(hist, value, objective):
    amount = Amount(value)
    advice = recommend_split(amount, hist, grid=UNIT, objective=objective)
    best = exhaustive_best_split(amount, hist, grid=UNIT, objective=objective)
    if best is None:
        assert advice.fallback
    else:
        assert not advice.fallback
        assert advice.parts == best[:2]
        assert advice.score == best[2]


@given(histograms, st.integers(2, 10 ** 6))
@settings(max_examples=200, deadline=None)
def test_recommendation_is_never_naive(hist, value):
    advice = recommend_split(Amount(value), hist, grid=UNIT)
    a, b = advice.parts
    assert a.zatoshi > 0 and b.zatoshi > 0
    assert a + b == Amount(value)


@given(histograms, st.integers(2, 10 ** 5))
@settings(max_examples=200, deadline=None)
def test_recommended_parts_are_grid_multiples(hist, units):
    grid = Amount(1000)
    scaled = DepositHistogram({Amount(v.zatoshi * grid.zatoshi): c for v, c in hist.counts.items()})
    advice = recommend_split(Amount(units * grid.zatoshi), scaled, grid=grid)
    assert all(part.zatoshi % grid.zatoshi == 0 for part in advice.parts)


@given(histograms, st.integers(1, 60), st.integers(1, 60))
@settings(max_examples=200, deadline=None)
def test_extra_deposit_never_lowers_a_split_score(hist, a, b):
    a, b = Amount(a), Amount(b)
    for objective in ('min_count', 'sum_log_count'):
        assert split_score(a, b, hist.with_deposit(a), objective) >= split_score(a, b, hist, objective)


# ------------------------------------------------------------------ service

def test_local_service_answers_from_public_ledger(pool):
    pool.deposit(zec(2), 1)
    pool.deposit(zec(5), 2)
    service = AdvisoryService(scenario(), pool.ledger, np.random.default_rng(0))
    advice = service.request(NetAddr('user-9'), zec(7))
    assert advice.parts == (zec(2), zec(5))
    assert service.answered == [advice]


def test_service_exchange_runs_through_entry_mix(tmp_path):
    world = World(scenario({'mixnet': {'enabled': True, 'sealer': 'x25519_aesgcm'}}))
    hop_log = HopLog('advisor-exchange', tmp_path / 'hops.jsonl')
    service = AdvisoryService(world.config, world.ledger, np.random.default_rng(0), world.mixnet, hop_log)
    user = NetAddr('user-0')

    advice = service.request(user, zec(10))
    hop_log.close()

    entry = world.mixnet.cascades[0].entry.address
    assert advice.fallback
    assert [(o.src, o.dst) for o in world.network.wire_log()] == [(user, entry), (entry, user)]
    assert {o.size for o in world.network.wire_log()} == {world.mixnet.frame_size}
    [record] = [json.loads(line) for line in (tmp_path / 'hops.jsonl').read_text().splitlines()]
    assert record['event'] == 'com'
    assert record['mix'] == entry.value
    assert record['response']['parts'] == [zec(1).zatoshi, zec(9).zatoshi]


# --------------------------------------------------------------- evaluation

def test_naive_unique_users_have_singleton_sets(advice_runs):
    baseline, _ = advice_runs
    outcomes = evaluate_advice(baseline, baseline)
    assert outcomes
    assert all(o.baseline_sets == (1,) for o in outcomes)
    assert all(o.treatment_sets == o.baseline_sets for o in outcomes)
    assert not any(o.advised for o in outcomes)


def test_advised_users_are_flagged(advice_runs):
    baseline, treatment = advice_runs
    outcomes = evaluate_advice(treatment, baseline)
    advised = [o for o in outcomes if o.advised]
    assert len(advised) == 50
    for outcome in advised:
        planned = treatment.workload.users[outcome.user].deposits[0].amount
        assert len(outcome.parts) == 2
        assert Amount.total(outcome.parts) == planned
        assert len(outcome.treatment_sets) == 2


def test_advice_raises_mean_set_size(advice_runs):
    baseline, treatment = advice_runs
    after, before = mean_set_sizes(evaluate_advice(treatment, baseline))
    assert before == 1.0
    assert after > before


def test_mismatched_seed_is_rejected(advice_runs):
    baseline, _ = advice_runs
    other = ScenarioRunner(scenario({'scenario': {'seed': 6}, 'workload': {'users': 5}})).run()
    with pytest.raises(MismatchedBaseline):
        evaluate_advice(other, baseline)


def test_advised_deposits_stay_on_the_grid(advice_runs):
    baseline, treatment = advice_runs
    grid = Amount.from_zec(1)
    outcomes = [o for o in evaluate_advice(treatment, baseline) if o.advised]
    assert outcomes
    for outcome in outcomes:
        if Amount.total(outcome.parts).zatoshi >= 2 * grid.zatoshi:
            assert all(part.zatoshi % grid.zatoshi == 0 for part in outcome.parts), outcome.parts
