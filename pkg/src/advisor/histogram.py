"""Histogram of prior pool deposits, built from public views only."""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Sequence

from src.adversary.value_linker import link_by_value
from src.ledger.models import Amount, PublicTxView, TxKind


@dataclass(frozen=True)
class DepositHistogram:
    """Amount -> number of prior non-zero deposit outputs of exactly that amount."""

    counts: Mapping[Amount, int] = field(default_factory=dict)

    def count(self, amount: Amount) -> int:
        return self.counts.get(amount, 0)

    def __contains__(self, amount: Amount) -> bool:
        return self.count(amount) > 0

    def __iter__(self) -> Iterator[Amount]:
        return iter(sorted(self.counts))

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def with_deposit(self, amount: Amount) -> 'DepositHistogram':
        """A copy with one more deposit output of `amount`."""
        counts = dict(self.counts)
        counts[amount] = counts.get(amount, 0) + 1
        return DepositHistogram(counts)

    def to_dict(self) -> Dict[int, int]:
        return {a.zatoshi: c for a, c in sorted(self.counts.items())}


def build_histogram(views: Sequence[PublicTxView], exclude_consumed: bool = False) -> DepositHistogram:
    """
    Count deposit outputs by exact value in one pass over the public views.

    Args:
        views: Time-ordered public ledger projection
        exclude_consumed: Leave out outputs the value attack has already
            linked uniquely to a withdrawal; they no longer hide anyone

    Returns:
        DepositHistogram with zero-value outputs excluded
    """
    counts: Counter = Counter()
    for view in views:
        if view.kind is TxKind.TZ:
            counts.update(view.matchable_amounts)

    if exclude_consumed:
        for hypothesis in link_by_value(views):
            if hypothesis.asserted:
                counts[hypothesis.amount] -= 1

    return DepositHistogram({amount: n for amount, n in counts.items() if n > 0})
