"""Command-line interface: run, compare and sweep."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.advisor.evaluation import MismatchedBaseline
from src.utils.config import ConfigLoader, ConfigurationError, build_config
from src.utils.logger import SimLogger

from .report import HarnessError, MetricsReport, compare, run_scenario
from .sweep import PARAMETERS, run_sweep


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='zcash-mixsim',
        description='Shielded-pool privacy simulator: value linking, mixnet defenses and split advice.'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Run one scenario and write its report')
    run.add_argument('--config', default='config.yaml', help='Scenario YAML/JSON file')
    run.add_argument('--seed', type=_seed, help='Override scenario.seed')
    run.add_argument('--out', required=True, type=Path, help='Output directory')

    cmp = commands.add_parser('compare', help='Diff two report.json files')
    cmp.add_argument('--baseline', required=True, type=Path, help='Baseline report (file or run directory)')
    cmp.add_argument('--treatment', required=True, type=Path, help='Treatment report (file or run directory)')
    cmp.add_argument('--out', type=Path, help='Directory for delta.json and delta.csv')

    sweep = commands.add_parser('sweep', help='Vary one parameter over a range')
    sweep.add_argument('--config', default='config.yaml', help='Base scenario YAML/JSON file')
    sweep.add_argument(
        '--vary', required=True,
        help=f"name=start:stop:step, name one of {', '.join(PARAMETERS)} (e.g. lambda=0:0.05:0.005)"
    )
    sweep.add_argument('--seed', type=_seed, help='Override scenario.seed')
    sweep.add_argument('--out', required=True, type=Path, help='Output directory')
    sweep.add_argument('--workers', type=int, default=1, help='Worker processes')
    return parser


def _run(args: argparse.Namespace) -> int:
    overrides = {'scenario.seed': args.seed} if args.seed is not None else {}
    config = ConfigLoader(args.config).load(overrides)
    logger = SimLogger.setup(config)
    logger.info(f"[CLI] run {args.config} -> {args.out}")

    report = run_scenario(config, args.out)
    for name, ok in sorted(report.invariants.items()):
        if not ok:
            logger.error(f"[CLI] Invariant violated: {name}")
    print(report.to_json())
    return EXIT_OK


def _compare(args: argparse.Namespace) -> int:
    logger = SimLogger.setup(build_config())
    baseline = MetricsReport.load(args.baseline)
    treatment = MetricsReport.load(args.treatment)
    delta = compare(baseline, treatment)

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / 'delta.json').write_text(json.dumps(delta.to_dict(), sort_keys=True, indent=2) + '\n', encoding='utf-8')
        delta.to_frame().to_csv(args.out / 'delta.csv', index=False)
    if delta.regressions:
        logger.warning(f"[CLI] Regressions: {', '.join(delta.regressions)}")
    print(json.dumps(delta.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _sweep(args: argparse.Namespace) -> int:
    overrides = {'scenario.seed': args.seed} if args.seed is not None else {}
    config = ConfigLoader(args.config).load(overrides)
    logger = SimLogger.setup(config)

    result = run_sweep(config, args.vary, max(1, args.workers))
    result.write(args.out)
    logger.info(f"[CLI] Sweep written to {args.out}")
    print(json.dumps(result.summary(), sort_keys=True, indent=2))
    return EXIT_OK


COMMANDS = {
    'run': _run,
    'compare': _compare,
    'sweep': _sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch.

    Returns:
        0 on success, 2 on configuration errors, 1 on anything else
    """
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)

    except ConfigurationError as e:
        print(f"Configuration Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    except (HarnessError, MismatchedBaseline) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return EXIT_FAILURE

    except Exception as e:
        logging.getLogger('zcash_mixsim').exception(f"Fatal error: {e}")
        print(f"Fatal Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
