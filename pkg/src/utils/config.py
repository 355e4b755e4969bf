"""Scenario configuration loading, defaults and schema validation."""

import copy
import os
from decimal import Decimal, InvalidOperation
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv


ZATOSHI_PER_ZEC = 10 ** 8


class ConfigurationError(Exception):
    """Raised when configuration is invalid or missing."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            message = message + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)
        super().__init__(message)


DEFAULT_SCENARIO: Dict[str, Any] = {
    'scenario': {
        'id': 'default',
        'seed': 1,
        'duration': 100_000,
    },
    'workload': {
        'users': 100,
        'tx_rate': 0.0005,
        'deposits_per_user': 1,
        'transparent_payments': 0,
        'zz_hops': 0,
        'think_time': 200,
        'values': {
            'kind': 'log_uniform',
            'min_zec': 0.01,
            'max_zec': 100,
            'choices_zec': [],
            'unique': False,
        },
    },
    'behavior': {
        'naive': 1.0,
        'advised': 0.0,
    },
    'ledger': {
        'view_policy': 'per_output',
    },
    'mixnet': {
        'enabled': False,
        'cascades': 1,
        'length': 3,
        'mean_delay': 50,
        'cover_rate': 0.0,
        'mix_cover_rate': 0.0,
        'cover_mode': 'drop',
        'droppers': [],
        'redundancy': 1,
        'sealer': 'keyed_stream',
    },
    'advisor': {
        'grid_zec': 0.01,
        'objective': 'min_count',
        'denominations_zec': [0.1, 1, 10],
        'exclude_consumed': True,
    },
    'adversary': {
        'value_attack': True,
        'network_attack': True,
        'activity_window': 1000,
    },
    'logging': {
        'file': 'logs/mixsim.log',
        'level': 'INFO',
        'max_size_mb': 10,
        'backup_count': 5,
        'console_output': True,
    },
}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_zec(value: Any) -> bool:
    """True when value is a non-negative ZEC amount with at most 8 decimals."""
    if not _is_number(value) or value < 0:
        return False
    try:
        zat = Decimal(str(value)) * ZATOSHI_PER_ZEC
    except InvalidOperation:
        return False
    return zat == zat.to_integral_value()


# Published schema: dotted path -> (check, message)
SCENARIO_SCHEMA: Dict[str, Tuple[Callable[[Any], bool], str]] = {
    'scenario.id': (lambda v: isinstance(v, str) and bool(v.strip()), 'must be a non-empty string'),
    'scenario.seed': (lambda v: _is_int(v) and 0 <= v < 2 ** 64, 'must be an unsigned 64-bit integer'),
    'scenario.duration': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer (ticks)'),
    'workload.users': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer'),
    'workload.tx_rate': (lambda v: _is_number(v) and v > 0, 'must be a positive number (lifecycles per tick)'),
    'workload.deposits_per_user': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer'),
    'workload.transparent_payments': (lambda v: _is_int(v) and v >= 0, 'must be a non-negative integer'),
    'workload.zz_hops': (lambda v: _is_int(v) and v >= 0, 'must be a non-negative integer'),
    'workload.think_time': (lambda v: _is_number(v) and v > 0, 'must be a positive number (mean ticks)'),
    'workload.values.kind': (lambda v: v in ('log_uniform', 'choice'), "must be 'log_uniform' or 'choice'"),
    'workload.values.min_zec': (lambda v: _is_zec(v) and v > 0, 'must be a positive ZEC amount'),
    'workload.values.max_zec': (lambda v: _is_zec(v) and v > 0, 'must be a positive ZEC amount'),
    'workload.values.choices_zec': (
        lambda v: isinstance(v, list) and all(_is_zec(x) and x > 0 for x in v),
        'must be a list of positive ZEC amounts'
    ),
    'workload.values.unique': (lambda v: isinstance(v, bool), 'must be a boolean'),
    'behavior.naive': (lambda v: _is_number(v) and 0 <= v <= 1, 'must be a fraction in [0, 1]'),
    'behavior.advised': (lambda v: _is_number(v) and 0 <= v <= 1, 'must be a fraction in [0, 1]'),
    'ledger.view_policy': (lambda v: v in ('total', 'per_output'), "must be 'total' or 'per_output'"),
    'mixnet.enabled': (lambda v: isinstance(v, bool), 'must be a boolean'),
    'mixnet.cascades': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer'),
    'mixnet.length': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer'),
    'mixnet.mean_delay': (lambda v: _is_number(v) and v > 0, 'must be a positive number (ticks)'),
    'mixnet.cover_rate': (lambda v: _is_number(v) and v >= 0, 'must be a non-negative rate'),
    'mixnet.mix_cover_rate': (lambda v: _is_number(v) and v >= 0, 'must be a non-negative rate'),
    'mixnet.cover_mode': (lambda v: v in ('drop', 'decoy'), "must be 'drop' or 'decoy'"),
    'mixnet.droppers': (
        lambda v: isinstance(v, list) and all(
            isinstance(p, (list, tuple)) and len(p) == 2 and all(_is_int(i) and i >= 0 for i in p)
            for p in v
        ),
        'must be a list of [cascade, position] pairs'
    ),
    'mixnet.redundancy': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer'),
    'mixnet.sealer': (lambda v: v in ('keyed_stream', 'x25519_aesgcm'), "must be 'keyed_stream' or 'x25519_aesgcm'"),
    'advisor.grid_zec': (lambda v: _is_zec(v) and v > 0, 'must be a positive ZEC amount'),
    'advisor.objective': (lambda v: v in ('min_count', 'sum_log_count'), "must be 'min_count' or 'sum_log_count'"),
    'advisor.denominations_zec': (
        lambda v: isinstance(v, list) and all(_is_zec(x) and x > 0 for x in v),
        'must be a list of positive ZEC amounts'
    ),
    'advisor.exclude_consumed': (lambda v: isinstance(v, bool), 'must be a boolean'),
    'adversary.value_attack': (lambda v: isinstance(v, bool), 'must be a boolean'),
    'adversary.network_attack': (lambda v: isinstance(v, bool), 'must be a boolean'),
    'adversary.activity_window': (lambda v: _is_int(v) and v >= 1, 'must be a positive integer (ticks)'),
}


def zec_to_zatoshi(value: Any) -> int:
    """
    Convert a ZEC amount from a config file into exact integer zatoshi.

    Args:
        value: ZEC amount (int, float or numeric string)

    Returns:
        Amount in zatoshi
    """
    zat = Decimal(str(value)) * ZATOSHI_PER_ZEC
    if zat != zat.to_integral_value():
        raise ConfigurationError(f"Amount {value} ZEC is not a whole number of zatoshi")
    return int(zat)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _lookup(config: Dict[str, Any], dotted: str) -> Tuple[bool, Any]:
    node: Any = config
    for part in dotted.split('.'):
        if not isinstance(node, dict) or part not in node:
            return False, None
        node = node[part]
    return True, node


def _assign(config: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split('.')
    node = config
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def validate_config(config: Dict[str, Any]) -> List[str]:
    """
    Validate a merged scenario configuration.

    Args:
        config: Configuration dictionary (already merged over defaults)

    Returns:
        List of field-level diagnostics; empty when the config is valid
    """
    diagnostics: List[str] = []

    for path, (check, message) in SCENARIO_SCHEMA.items():
        present, value = _lookup(config, path)
        if not present:
            diagnostics.append(f"{path}: missing")
        elif not check(value):
            diagnostics.append(f"{path}: {message} (got {value!r})")

    if diagnostics:
        return diagnostics

    behavior = config['behavior']
    total = Decimal(str(behavior['naive'])) + Decimal(str(behavior['advised']))
    if total != 1:
        diagnostics.append(f"behavior: naive + advised must sum to 1 (got {total})")

    values = config['workload']['values']
    if values['kind'] == 'log_uniform' and values['min_zec'] > values['max_zec']:
        diagnostics.append("workload.values: min_zec must not exceed max_zec")
    if values['kind'] == 'choice' and not values['choices_zec']:
        diagnostics.append("workload.values.choices_zec: required when kind is 'choice'")

    mixnet = config['mixnet']
    if mixnet['redundancy'] > mixnet['cascades']:
        diagnostics.append(
            f"mixnet.redundancy: must not exceed mixnet.cascades "
            f"({mixnet['redundancy']} > {mixnet['cascades']})"
        )
    for cascade, position in mixnet['droppers']:
        if cascade >= mixnet['cascades'] or position >= mixnet['length']:
            diagnostics.append(
                f"mixnet.droppers: [{cascade}, {position}] is outside "
                f"{mixnet['cascades']} cascades of length {mixnet['length']}"
            )

    return diagnostics


def build_config(overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Merge overrides over the defaults and validate the result.

    Args:
        overrides: Partial scenario configuration

    Returns:
        Complete, validated configuration dictionary

    Raises:
        ConfigurationError: If any field is invalid
    """
    config = deep_merge(DEFAULT_SCENARIO, overrides or {})
    diagnostics = validate_config(config)
    if diagnostics:
        raise ConfigurationError("Invalid scenario configuration", diagnostics)
    return config


def with_overrides(config: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Copy a configuration, set dotted-path values and validate the result.

    Args:
        config: Base configuration
        overrides: Dotted path -> value (e.g. {'mixnet.cover_rate': 0.01})

    Returns:
        New validated configuration; the base is left untouched

    Raises:
        ConfigurationError: If the overridden configuration is invalid
    """
    updated = copy.deepcopy(config)
    for dotted, value in overrides.items():
        _assign(updated, dotted, value)
    return build_config(updated)


class ConfigLoader:
    """Loads and validates scenario configuration from .env and a YAML/JSON file."""

    def __init__(self, config_path: str = "config.yaml"):
        """
        Initialize the configuration loader.

        Args:
            config_path: Path to the YAML (or JSON) scenario file
        """
        self.config_path = config_path
        self.config: Dict[str, Any] = {}

    def load(self, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Load configuration from .env and the scenario file.

        Args:
            overrides: Dotted-path overrides applied after the file
                (e.g. {'scenario.seed': 7} from the command line)

        Returns:
            Complete configuration dictionary

        Raises:
            ConfigurationError: If configuration is invalid
        """
        load_dotenv()

        try:
            with open(self.config_path, 'r') as f:
                file_config = yaml.safe_load(f)
        except FileNotFoundError:
            raise ConfigurationError(f"Configuration file not found: {self.config_path}")
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML/JSON syntax in {self.config_path}: {e}")

        if file_config is None:
            raise ConfigurationError(f"Empty or invalid configuration file: {self.config_path}")
        if not isinstance(file_config, dict):
            raise ConfigurationError(f"Top level of {self.config_path} must be a mapping")

        for dotted, value in (overrides or {}).items():
            _assign(file_config, dotted, value)

        self._merge_env_vars(file_config)
        self.config = build_config(file_config)
        return self.config

    def _merge_env_vars(self, config: Dict[str, Any]) -> None:
        """Merge environment variables into the configuration dict."""
        if os.getenv('MIXSIM_LOG_FILE'):
            _assign(config, 'logging.file', os.getenv('MIXSIM_LOG_FILE'))
        if os.getenv('LOG_LEVEL'):
            _assign(config, 'logging.level', os.getenv('LOG_LEVEL').upper())

