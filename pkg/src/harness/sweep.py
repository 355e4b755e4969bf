"""One-parameter sweeps over scenario settings, optionally in worker processes."""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.utils.config import ConfigurationError, with_overrides

from .report import run_scenario


logger = logging.getLogger('zcash_mixsim')


@dataclass(frozen=True)
class SweepParameter:
    """A sweepable knob: the config path it sets and how the advantage is read."""

    name: str
    path: str
    integer: bool
    advantage: str
    needs_mixnet: bool = True


PARAMETERS: Dict[str, SweepParameter] = {
    'lambda': SweepParameter('lambda', 'mixnet.cover_rate', False, 'network.guess_probability'),
    'mu': SweepParameter('mu', 'mixnet.mean_delay', False, 'network.guess_probability'),
    'k': SweepParameter('k', 'mixnet.redundancy', True, 'network.guess_probability'),
    'L': SweepParameter('L', 'mixnet.length', True, 'network.guess_probability'),
    'advised': SweepParameter('advised', 'behavior.advised', False, 'value.recall', needs_mixnet=False),
}

# Largest number of points one --vary range may expand to
MAX_POINTS = 10_000


def parse_vary(vary: str) -> Tuple[SweepParameter, List[Any]]:
    """
    Parse `name=start:stop:step` into a parameter and its inclusive value list.

    Decimal arithmetic keeps 0:0.05:0.005 at exactly eleven points.

    Args:
        vary: Command-line --vary argument

    Returns:
        (parameter, values in increasing order)

    Raises:
        ConfigurationError: If the name is unknown or the range is malformed
    """
    name, sep, rng = vary.partition('=')
    name = name.strip()
    if not sep or name not in PARAMETERS:
        raise ConfigurationError(
            "Invalid --vary argument",
            [f"vary: expected one of {', '.join(PARAMETERS)} as name=start:stop:step (got {vary!r})"]
        )
    parameter = PARAMETERS[name]

    try:
        start, stop, step = (Decimal(part.strip()) for part in rng.split(':'))
    except (ValueError, InvalidOperation):
        raise ConfigurationError(
            "Invalid --vary argument",
            [f"vary.{name}: range must be start:stop:step numbers (got {rng!r})"]
        )
    if step <= 0 or stop < start:
        raise ConfigurationError(
            "Invalid --vary argument",
            [f"vary.{name}: need step > 0 and stop >= start (got {rng!r})"]
        )

    count = int((stop - start) / step) + 1
    if count > MAX_POINTS:
        raise ConfigurationError("Invalid --vary argument", [f"vary.{name}: {count} points exceed {MAX_POINTS}"])

    values: List[Any] = []
    for i in range(count):
        value = start + step * i
        if parameter.integer:
            if value != value.to_integral_value():
                raise ConfigurationError(
                    "Invalid --vary argument", [f"vary.{name}: {value} is not an integer"]
                )
            values.append(int(value))
        else:
            values.append(float(value))
    return parameter, values


def point_config(base: Dict[str, Any], parameter: SweepParameter, value: Any) -> Dict[str, Any]:
    """
    The scenario for one sweep point.

    Raises:
        ConfigurationError: If the point's configuration is invalid
    """
    overrides: Dict[str, Any] = {parameter.path: value}
    if parameter.needs_mixnet:
        overrides['mixnet.enabled'] = True
    if parameter.name == 'advised':
        overrides['behavior.naive'] = float(Decimal(1) - Decimal(str(value)))
    overrides['scenario.id'] = f"{base['scenario']['id']}-{parameter.name}={value}"
    return with_overrides(base, overrides)


def _run_point(job: Tuple[Dict[str, Any], str, Any]) -> Dict[str, Any]:
    config, name, value = job
    parameter = PARAMETERS[name]
    report = run_scenario(config)
    metrics = report.metrics()
    return {
        'parameter': name,
        'value': value,
        'advantage': metrics.get(parameter.advantage),
        **metrics,
    }


def is_monotone_nonincreasing(values: Sequence[Optional[float]], tolerance: float = 1e-12) -> bool:
    present = [v for v in values if v is not None]
    return all(later <= earlier + tolerance for earlier, later in zip(present, present[1:]))


@dataclass
class SweepResult:
    parameter: SweepParameter
    rows: List[Dict[str, Any]]

    @property
    def advantages(self) -> List[Optional[float]]:
        return [row['advantage'] for row in self.rows]

    @property
    def monotone(self) -> bool:
        return is_monotone_nonincreasing(self.advantages)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def summary(self) -> Dict[str, Any]:
        return {
            'parameter': self.parameter.name,
            'config_path': self.parameter.path,
            'advantage_metric': self.parameter.advantage,
            'values': [row['value'] for row in self.rows],
            'advantage': self.advantages,
            'monotone_nonincreasing': self.monotone,
        }

    def write(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out_dir / 'sweep.csv', index=False)
        (out_dir / 'sweep.json').write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + '\n', encoding='utf-8')


def run_sweep(base: Dict[str, Any], vary: str, workers: int = 1) -> SweepResult:
    """
    Run one scenario per value of the varied parameter.

    Every point shares the base seed, so workload values are identical
    across the sweep. Whether the advantage curve is monotone is reported,
    never enforced.

    Args:
        base: Validated base scenario
        vary: `name=start:stop:step`
        workers: Worker processes; 1 runs in-process

    Returns:
        SweepResult ordered by parameter value

    Raises:
        ConfigurationError: If the range or any point's configuration is invalid
    """
    parameter, values = parse_vary(vary)
    jobs = [(point_config(base, parameter, value), parameter.name, value) for value in values]
    logger.info(f"[Sweep] {parameter.name} ({parameter.path}) over {len(jobs)} points with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(job) for job in jobs]

    result = SweepResult(parameter, rows)
    logger.info(
        f"[Sweep] {parameter.advantage}: {result.advantages} "
        f"({'monotone' if result.monotone else 'not monotone'})"
    )
    return result
