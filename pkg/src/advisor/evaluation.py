"""Compare the anonymity sets advised users get against a naive baseline run."""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.adversary.value_linker import candidate_set_sizes, exhaustive_value_links
from src.ledger.ground_truth import TxRole
from src.ledger.models import Amount

from .split_advisor import AdvisorError

if TYPE_CHECKING:
    from src.harness.runner import ScenarioRun


logger = logging.getLogger('zcash_mixsim')


class MismatchedBaseline(AdvisorError):
    """Two runs do not share seed and workload, so they cannot be compared."""
    pass


@dataclass(frozen=True)
class AdviceOutcome:
    """
    One depositing user's withdrawals in the treatment run and in the baseline.

    Set sizes are the candidate-set sizes each withdrawal faces under the
    value attack; None marks a withdrawal no deposit value matches.
    """

    user: int
    advised: bool
    fallback: bool
    parts: Tuple[Amount, ...]
    treatment_sets: Tuple[Optional[int], ...]
    baseline_sets: Tuple[Optional[int], ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'user': self.user,
            'advised': self.advised,
            'fallback': self.fallback,
            'parts': [p.zatoshi for p in self.parts],
            'treatment_sets': list(self.treatment_sets),
            'baseline_sets': list(self.baseline_sets),
        }


def check_matching(treatment: 'ScenarioRun', baseline: 'ScenarioRun') -> None:
    """
    Raises:
        MismatchedBaseline: If seed, user count or workload digest differ
    """
    problems = []
    if treatment.seed != baseline.seed:
        problems.append(f"seed {treatment.seed} != {baseline.seed}")
    if len(treatment.workload.users) != len(baseline.workload.users):
        problems.append(f"users {len(treatment.workload.users)} != {len(baseline.workload.users)}")
    if treatment.workload.digest != baseline.workload.digest:
        problems.append("workload values differ")
    if problems:
        raise MismatchedBaseline("runs are not comparable: " + "; ".join(problems))


def _user_sets(run: 'ScenarioRun') -> Dict[int, Tuple[Optional[int], ...]]:
    sizes = candidate_set_sizes(exhaustive_value_links(run.ledger.views()))
    per_user: Dict[int, List[Optional[int]]] = {}
    for record in run.ground_truth.by_role(TxRole.WITHDRAWAL):
        if run.ledger.contains(record.tx_id):
            per_user.setdefault(record.owner, []).append(sizes.get(record.tx_id))
    return {u: tuple(sorted(s, key=lambda v: (v is None, v or 0))) for u, s in per_user.items()}


def evaluate_advice(treatment: 'ScenarioRun', baseline: 'ScenarioRun') -> List[AdviceOutcome]:
    """
    Pair each depositing user's withdrawal anonymity sets across two runs.

    Args:
        treatment: Run with the advisor enabled for some users
        baseline: Run with the same seed and workload, all users naive

    Returns:
        One AdviceOutcome per user with an applied deposit in the treatment run

    Raises:
        MismatchedBaseline: If the runs do not share seed and workload
    """
    check_matching(treatment, baseline)

    after = _user_sets(treatment)
    before = _user_sets(baseline)

    outcomes = []
    deposits: Dict[int, List] = {}
    for record in treatment.ground_truth.by_role(TxRole.DEPOSIT):
        if treatment.ledger.contains(record.tx_id):
            deposits.setdefault(record.owner, []).append(record)

    for user in sorted(deposits):
        records = deposits[user]
        parts: List[Amount] = []
        for record in records:
            tx = treatment.ledger.transaction(record.tx_id)
            parts.extend(amount for _, amount in tx.outputs if amount)
        outcomes.append(AdviceOutcome(
            user=user,
            advised=any(r.advised for r in records),
            fallback=any(r.fallback for r in records),
            parts=tuple(sorted(parts)),
            treatment_sets=after.get(user, ()),
            baseline_sets=before.get(user, ()),
        ))
    return outcomes


def mean_set_sizes(outcomes: Sequence[AdviceOutcome]) -> Tuple[float, float]:
    """Mean matched candidate-set size (treatment, baseline) over all users' withdrawals."""
    def mean(sets):
        values = [s for group in sets for s in group if s is not None]
        return float(np.mean(values)) if values else 1.0

    return mean(o.treatment_sets for o in outcomes), mean(o.baseline_sets for o in outcomes)
