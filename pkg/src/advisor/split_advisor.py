"""Two-way coin-split recommendation."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from src.ledger.models import Amount

from .histogram import DepositHistogram


logger = logging.getLogger('zcash_mixsim')


class AdvisorError(Exception):
    """Base class for advisor errors."""
    pass


class AmountTooSmall(AdvisorError):
    """An amount below 2 zatoshi cannot be split into two positive parts."""
    pass


OBJECTIVES = ('min_count', 'sum_log_count')
DEFAULT_GRID = Amount.from_zec('0.01')
DEFAULT_DENOMINATIONS = (Amount.from_zec('0.1'), Amount.from_zec('1'), Amount.from_zec('10'))


@dataclass(frozen=True)
class SplitRecommendation:
    """
    Advice to deposit `amount` as two outputs a + b.

    Attributes:
        parts: (a, b) with a <= b, both positive, a + b == amount
        score: Objective value of the split (min count, or sum of log counts)
        fallback: True when no split had both parts in the history
    """

    amount: Amount
    parts: Tuple[Amount, Amount]
    score: float
    fallback: bool = False
    objective: str = 'min_count'

    def __post_init__(self):
        a, b = self.parts
        if not a or not b:
            raise ValueError(f"split {a} + {b} has a zero part")
        if a + b != self.amount:
            raise ValueError(f"split {a} + {b} does not add up to {self.amount}")
        if a > b:
            raise ValueError(f"split parts must be ordered, got {a} > {b}")

    def to_dict(self) -> dict:
        return {
            'amount': self.amount.zatoshi,
            'parts': [p.zatoshi for p in self.parts],
            'score': self.score,
            'fallback': self.fallback,
            'objective': self.objective,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SplitRecommendation':
        a, b = data['parts']
        return cls(Amount(data['amount']), (Amount(a), Amount(b)), data['score'], data['fallback'], data['objective'])


def split_score(a: Amount, b: Amount, hist: DepositHistogram, objective: str = 'min_count') -> float:
    """
    Objective value of splitting into a and b.

    min_count is the anonymity set of the weaker part; sum_log_count is
    log count(a) + log count(b) and is -inf when either count is zero.
    """
    ca, cb = hist.count(a), hist.count(b)
    if objective == 'sum_log_count':
        if not ca or not cb:
            return float('-inf')
        return math.log(ca) + math.log(cb)
    return min(ca, cb)


def _rank(a: Amount, b: Amount, hist: DepositHistogram, objective: str) -> Tuple[int, int, int]:
    # Exact integer key: the product orders splits like the sum of logs does
    ca, cb = hist.count(a), hist.count(b)
    primary = ca * cb if objective == 'sum_log_count' else min(ca, cb)
    return primary, ca + cb, -a.zatoshi


def _check(amount: Amount, grid: Amount, objective: str) -> None:
    if amount.zatoshi < 2:
        raise AmountTooSmall(f"cannot split {amount.zatoshi} zatoshi into two positive parts")
    if not grid:
        raise ValueError("grid must be positive")
    if objective not in OBJECTIVES:
        raise ValueError(f"Unknown objective: {objective}. Valid options: {', '.join(OBJECTIVES)}")


def fallback_split(
    amount: Amount,
    hist: DepositHistogram,
    denominations: Sequence[Amount] = DEFAULT_DENOMINATIONS,
    grid: Amount = DEFAULT_GRID
) -> Tuple[Amount, Amount]:
    """
    Split at the most common round denomination not above half the amount.

    Only denominations on the value grid qualify. Ties between equally
    common denominations go to the larger one. When none fits, a is half
    the amount rounded down to the grid; below two grid units it is half
    the amount in zatoshi.
    """
    fitting = [
        d for d in denominations
        if d and d.zatoshi % grid.zatoshi == 0 and 2 * d.zatoshi <= amount.zatoshi
    ]
    if fitting:
        a = max(fitting, key=lambda d: (hist.count(d), d.zatoshi))
    else:
        units = amount.zatoshi // (2 * grid.zatoshi)
        a = Amount(units * grid.zatoshi) if units else Amount(amount.zatoshi // 2)
    return a, amount - a


def recommend_split(
    amount: Amount,
    hist: DepositHistogram,
    grid: Amount = DEFAULT_GRID,
    objective: str = 'min_count',
    denominations: Sequence[Amount] = DEFAULT_DENOMINATIONS
) -> SplitRecommendation:
    """
    Recommend the split (a, X - a) that maximizes the deposit's anonymity set.

    Candidates are grid multiples a with 0 < a <= X/2. Only splits whose two
    parts both occur in the history can score, so the search walks the
    histogram's keys instead of the whole grid. Ties go to the larger count
    sum, then to the smaller a.

    Args:
        amount: Value X to deposit
        hist: Histogram of prior deposits
        grid: Value grid for the parts
        objective: 'min_count' or 'sum_log_count'
        denominations: Round values for the fallback rule

    Returns:
        SplitRecommendation, flagged fallback when no candidate scores

    Raises:
        AmountTooSmall: If amount is below 2 zatoshi
    """
    _check(amount, grid, objective)

    best: Optional[Tuple[Tuple[int, int, int], Amount]] = None
    for a in hist:
        if a.zatoshi % grid.zatoshi or 2 * a.zatoshi > amount.zatoshi:
            continue
        b = amount - a
        if hist.count(b) < 1:
            continue
        key = _rank(a, b, hist, objective)
        if best is None or key > best[0]:
            best = (key, a)

    if best is not None:
        a = best[1]
        parts = (a, amount - a)
        return SplitRecommendation(amount, parts, split_score(*parts, hist, objective), False, objective)

    parts = fallback_split(amount, hist, denominations, grid)
    logger.debug(f"[Advisor] No scoring split for {amount}; fallback {parts[0]} + {parts[1]}")
    return SplitRecommendation(amount, parts, split_score(*parts, hist, 'min_count'), True, objective)


def exhaustive_best_split(
    amount: Amount,
    hist: DepositHistogram,
    grid: Amount = DEFAULT_GRID,
    objective: str = 'min_count'
) -> Optional[Tuple[Amount, Amount, float]]:
    """
    Brute-force reference: score every grid split and keep the best.

    Returns:
        (a, b, score) of the best scoring split, or None when none scores
    """
    _check(amount, grid, objective)
    best = None
    best_key = None
    step = grid.zatoshi
    for units in range(1, amount.zatoshi // (2 * step) + 1):
        a = Amount(units * step)
        b = amount - a
        if hist.count(a) < 1 or hist.count(b) < 1:
            continue
        key = _rank(a, b, hist, objective)
        if best_key is None or key > best_key:
            best_key = key
            best = (a, b, split_score(a, b, hist, objective))
    return best
