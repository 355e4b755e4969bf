"""Pre-drawn user workloads: deposit values, start ticks, think times and payments."""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Set, Tuple

import numpy as np

from src.ledger.models import Amount
from src.utils.config import ConfigurationError, zec_to_zatoshi


logger = logging.getLogger('zcash_mixsim')

NAIVE = 'naive'
ADVISED = 'advised'

MAX_UNIQUE_ATTEMPTS = 10_000


@dataclass(frozen=True)
class DepositPlan:
    """
    One deposit lifecycle.

    `think_times[n][s]` is the wait before step s (ZZ hops, then the
    withdrawal) of the n-th note. Naive deposits only use the first row.
    """

    user: int
    index: int
    amount: Amount
    start: int
    think_times: Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class PaymentPlan:
    user: int
    recipient: int
    amount: Amount
    at: int


@dataclass(frozen=True)
class UserPlan:
    user: int
    behavior: str
    deposits: Tuple[DepositPlan, ...]
    payments: Tuple[PaymentPlan, ...]

    @property
    def funding(self) -> Amount:
        """Genesis allocation covering every planned deposit and payment."""
        return Amount.total([d.amount for d in self.deposits] + [p.amount for p in self.payments])


@dataclass(frozen=True)
class Workload:
    users: Tuple[UserPlan, ...]
    digest: str

    @property
    def deposits(self) -> List[DepositPlan]:
        return [d for u in self.users for d in u.deposits]


class ValueSampler:
    """Draws deposit values on the advisor grid, optionally without repeats."""

    def __init__(self, section: Dict[str, Any], grid: int, rng: np.random.Generator):
        self.kind = section.get('kind', 'log_uniform')
        self.unique = section.get('unique', False)
        self.grid = grid
        self.rng = rng
        self.low = math.log(zec_to_zatoshi(section.get('min_zec', 0.01)))
        self.high = math.log(zec_to_zatoshi(section.get('max_zec', 100)))
        self.choices = [zec_to_zatoshi(v) for v in section.get('choices_zec', [])]
        self._seen: Set[int] = set()

    def _value(self) -> int:
        if self.kind == 'choice':
            return self.choices[int(self.rng.integers(len(self.choices)))]
        zatoshi = math.exp(self.rng.uniform(self.low, self.high))
        return max(2, max(1, int(round(zatoshi / self.grid))) * self.grid)

    def draw(self, unique: bool = True) -> Amount:
        for _ in range(MAX_UNIQUE_ATTEMPTS):
            value = self._value()
            if not (unique and self.unique):
                return Amount(value)
            if value not in self._seen:
                self._seen.add(value)
                return Amount(value)
        raise ConfigurationError(
            "Cannot draw unique deposit values",
            [f"workload.values: range holds too few grid values for {len(self._seen) + 1} unique deposits"]
        )


def _delay(rng: np.random.Generator, mean: float) -> int:
    return max(1, int(round(rng.exponential(mean))))


def generate_workload(
    config: Dict[str, Any],
    rng: np.random.Generator,
    behavior_rng: np.random.Generator
) -> Workload:
    """
    Draw every user's plan up front.

    Values, ticks and think times come only from `rng`; behaviors come from
    `behavior_rng`. Two configs that differ only in behavior fractions or
    defenses therefore share identical values and the same digest.

    Args:
        config: Full scenario configuration
        rng: Workload random stream
        behavior_rng: Behavior assignment random stream

    Returns:
        Workload with a digest over all drawn values
    """
    workload = config.get('workload', {})
    n_users = workload.get('users', 100)
    rate = workload.get('tx_rate', 0.0005)
    hops = workload.get('zz_hops', 0)
    think = workload.get('think_time', 200)
    duration = config.get('scenario', {}).get('duration', 100_000)
    grid = zec_to_zatoshi(config.get('advisor', {}).get('grid_zec', 0.01))
    sampler = ValueSampler(workload.get('values', {}), grid, rng)

    plans: List[Tuple[List[DepositPlan], List[PaymentPlan]]] = []
    for user in range(n_users):
        deposits = []
        start = 0.0
        for index in range(workload.get('deposits_per_user', 1)):
            start += rng.exponential(1.0 / rate)
            think_times = tuple(
                tuple(_delay(rng, think) for _ in range(hops + 1)) for _ in range(2)
            )
            deposits.append(DepositPlan(user, index, sampler.draw(), int(start), think_times))

        payments = []
        for _ in range(workload.get('transparent_payments', 0)):
            if n_users < 2:
                break
            recipient = int(rng.integers(n_users - 1))
            if recipient >= user:
                recipient += 1
            amount = sampler.draw(unique=False)
            payments.append(PaymentPlan(user, recipient, amount, int(rng.integers(duration))))
        plans.append((deposits, payments))

    behavior = config.get('behavior', {})
    n_advised = int(round(behavior.get('advised', 0.0) * n_users))
    order = behavior_rng.permutation(n_users)
    advised = {int(u) for u in order[:n_advised]}

    users = tuple(
        UserPlan(u, ADVISED if u in advised else NAIVE, tuple(d), tuple(p))
        for u, (d, p) in enumerate(plans)
    )
    result = Workload(users, _digest(users))
    logger.info(
        f"[Workload] {n_users} users, {len(result.deposits)} deposits, "
        f"{n_advised} advised, digest {result.digest[:12]}"
    )
    return result


def _digest(users: Tuple[UserPlan, ...]) -> str:
    document = [
        {
            'user': u.user,
            'deposits': [[d.amount.zatoshi, d.start, d.think_times] for d in u.deposits],
            'payments': [[p.recipient, p.amount.zatoshi, p.at] for p in u.payments],
        }
        for u in users
    ]
    return hashlib.sha256(json.dumps(document, sort_keys=True).encode('utf-8')).hexdigest()
