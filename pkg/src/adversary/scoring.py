"""Attack scores against simulator ground truth."""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from src.ledger.ground_truth import GroundTruth

from .value_linker import LinkHypothesis


logger = logging.getLogger('zcash_mixsim')


class AdversaryError(Exception):
    """Base class for adversary errors."""
    pass


class UnknownTxId(AdversaryError):
    """A hypothesis names a transaction the ground truth does not know."""
    pass


@dataclass(frozen=True)
class AttackScore:
    """
    Accuracy and anonymity metrics of one attack.

    Ratios whose denominator is empty are reported as 0.0 with
    `undefined` set. `unattributed` counts mix broadcasts with no sending
    user inside the activity window; their sender set is every user.
    """

    attack: str
    precision: float = 0.0
    recall: float = 0.0
    mean_anonymity_set: float = 1.0
    median_anonymity_set: float = 1.0
    mean_entropy: float = 0.0
    asserted: int = 0
    correct: int = 0
    truth: int = 0
    scored: int = 0
    guess_probability: float = 1.0
    unattributed: int = 0
    undefined: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def csv_row(self, scenario: str, seed: int) -> Dict[str, Any]:
        """Flat row keyed by (scenario, seed, attack)."""
        return {'scenario': scenario, 'seed': seed, **self.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackScore':
        return cls(**data)


def set_statistics(sizes: Sequence[int]) -> Dict[str, float]:
    """
    Aggregate anonymity-set sizes under the uniform-candidate assumption.

    Returns:
        mean and median size, mean entropy in bits and mean guess probability;
        neutral values (1, 1, 0, 1) when there is nothing to aggregate
    """
    if not sizes:
        return {'mean': 1.0, 'median': 1.0, 'entropy': 0.0, 'guess': 1.0}
    arr = np.asarray(sizes, dtype=float)
    return {
        'mean': float(arr.mean()),
        'median': float(np.median(arr)),
        'entropy': float(np.log2(arr).mean()),
        'guess': float((1.0 / arr).mean()),
    }


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def score(hypotheses: Sequence[LinkHypothesis], ground_truth: GroundTruth) -> AttackScore:
    """
    Score value-linking hypotheses against the true deposit/withdrawal pairs.

    Args:
        hypotheses: Output of link_by_value
        ground_truth: Simulator ground truth with synced links

    Returns:
        AttackScore for the 'value' attack

    Raises:
        UnknownTxId: If a hypothesis names a transaction outside the ground truth
    """
    for h in hypotheses:
        for tx_id in (h.deposit_id, h.withdrawal_id):
            if not ground_truth.knows(tx_id):
                raise UnknownTxId(f"ground truth has no record of tx {tx_id}")

    asserted = {(h.deposit_id, h.withdrawal_id) for h in hypotheses if h.asserted}
    correct = asserted & set(ground_truth.links)
    truth = len(ground_truth.links)

    sizes: Dict[str, int] = {}
    for h in hypotheses:
        sizes[h.withdrawal_id] = h.candidate_set_size
    stats = set_statistics(list(sizes.values()))

    precision = _ratio(len(correct), len(asserted))
    recall = _ratio(len(correct), truth)

    result = AttackScore(
        attack='value',
        precision=precision or 0.0,
        recall=recall or 0.0,
        mean_anonymity_set=stats['mean'],
        median_anonymity_set=stats['median'],
        mean_entropy=stats['entropy'],
        asserted=len(asserted),
        correct=len(correct),
        truth=truth,
        scored=len(sizes),
        guess_probability=stats['guess'],
        undefined=precision is None or recall is None,
    )
    logger.info(
        f"[Adversary] Value attack precision={result.precision:.3f} recall={result.recall:.3f} "
        f"mean set={result.mean_anonymity_set:.2f} over {result.scored} withdrawals"
    )
    return result


def entropy_bits(candidate_set_size: int) -> float:
    """Entropy of a uniform choice among `candidate_set_size` candidates."""
    return float(np.log2(candidate_set_size))
