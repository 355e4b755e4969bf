"""Application-layer attack: link deposits to withdrawals by exact value."""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence

from src.ledger.models import Amount, PublicTxView, TxKind


logger = logging.getLogger('zcash_mixsim')


@dataclass(frozen=True)
class LinkHypothesis:
    """One (deposit, withdrawal) pair the attacker considers possible."""

    deposit_id: str
    withdrawal_id: str
    candidate_set_size: int
    amount: Amount

    def __post_init__(self):
        if self.candidate_set_size < 1:
            raise ValueError("candidate set size must be at least 1")

    @property
    def asserted(self) -> bool:
        return self.candidate_set_size == 1


class _Deposit:
    __slots__ = ('view', 'remaining')

    def __init__(self, view: PublicTxView):
        self.view = view
        self.remaining = Counter(view.matchable_amounts)


def link_by_value(views: Sequence[PublicTxView]) -> List[LinkHypothesis]:
    """
    Match every withdrawal against earlier deposits carrying the same value.

    Views are walked in ledger order. For a withdrawal of value v the
    candidate set is every earlier deposit that still has an unconsumed
    output of value v. A singleton candidate set is an asserted link and
    consumes that output.

    Args:
        views: Public projection of the ledger, in ledger order

    Returns:
        One hypothesis per (candidate deposit, withdrawal) pair
    """
    by_amount: Dict[Amount, List[_Deposit]] = defaultdict(list)
    hypotheses: List[LinkHypothesis] = []

    for view in views:
        if view.kind is TxKind.TZ:
            deposit = _Deposit(view)
            for amount in deposit.remaining:
                by_amount[amount].append(deposit)
        elif view.kind is TxKind.ZT and view.visible_amount:
            value = view.visible_amount
            candidates = [
                d for d in by_amount.get(value, ())
                if d.remaining[value] > 0 and d.view.timestamp < view.timestamp
            ]
            for d in candidates:
                hypotheses.append(LinkHypothesis(d.view.tx_id, view.tx_id, len(candidates), value))
            if len(candidates) == 1:
                candidates[0].remaining[value] -= 1

    logger.debug(
        f"[Adversary] Value attack: {len(hypotheses)} hypotheses, "
        f"{sum(1 for h in hypotheses if h.asserted)} asserted"
    )
    return hypotheses


def exhaustive_value_links(views: Sequence[PublicTxView]) -> List[LinkHypothesis]:
    """
    Reference enumeration of the value attack by direct pairwise scan.

    Quadratic in the number of views; used to check link_by_value.
    """
    consumed: Counter = Counter()
    hypotheses: List[LinkHypothesis] = []

    for j, withdrawal in enumerate(views):
        if withdrawal.kind is not TxKind.ZT or not withdrawal.visible_amount:
            continue
        value = withdrawal.visible_amount
        candidates = []
        for deposit in views[:j]:
            if deposit.kind is not TxKind.TZ or deposit.timestamp >= withdrawal.timestamp:
                continue
            outputs = list(deposit.matchable_amounts).count(value)
            if outputs - consumed[(deposit.tx_id, value)] > 0:
                candidates.append(deposit.tx_id)
        for deposit_id in candidates:
            hypotheses.append(LinkHypothesis(deposit_id, withdrawal.tx_id, len(candidates), value))
        if len(candidates) == 1:
            consumed[(candidates[0], value)] += 1

    return hypotheses


def candidate_set_sizes(hypotheses: Sequence[LinkHypothesis]) -> Dict[str, int]:
    """Withdrawal id -> candidate-set size."""
    return {h.withdrawal_id: h.candidate_set_size for h in hypotheses}
