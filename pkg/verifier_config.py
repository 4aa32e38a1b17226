#!/usr/bin/env python3
"""
Verifier Configuration
Loads config.yaml into Settings, with every real written as an exact
decimal or rational string, and sets up logging for the command line.
"""

import os
import sys
import logging
from dataclasses import dataclass, field, replace

import yaml

from exact_count import DEFAULT_MEMORY_BUDGET, ORACLE_CAP
from scalar_constants import DEFAULT_PRECISION_BITS, DEFAULT_TABLE, ParameterTable, parse_decimal
from verifier_errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = '1.0.0'
DEFAULT_CONFIG_FILE = 'config.yaml'
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

_TOP_KEYS = {'precision_bits', 'memory_budget_bytes', 'worker_count', 'f_err_max', 'strict_hypotheses',
             'output_dir', 'log_file', 'parameters', 'delta', 'epsilon1', 'weights', 'sweep', 'oracle_cap'}
_PARAMETER_KEYS = {'c', 'epsilon', 'epsilon2', 'xi'}
_SWEEP_KEYS = {'checkpoint_every', 'checkpoint_dir', 'cache_dir', 'spot_checks', 'spot_check_cap', 'seed'}


@dataclass(frozen=True)
class Settings:
    """
    Everything a run reads from config.yaml

    Attributes:
        precision_bits (int): Working precision of constants and thresholds
        memory_budget_bytes (int): Budget for count series
        worker_count (int): Processes for per-d work
        table (ParameterTable): Bound parameters keyed by parity
        strict_hypotheses (bool): Raise on flagged bound hypotheses
    """
    precision_bits: int = DEFAULT_PRECISION_BITS
    memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET
    worker_count: int = 1
    strict_hypotheses: bool = False
    output_dir: str = 'results'
    log_file: str = 'verification.log'
    table: ParameterTable = field(default=DEFAULT_TABLE)
    checkpoint_every: int = 100000
    checkpoint_dir: str = 'checkpoints'
    cache_dir: str = 'series_cache'
    spot_checks: int = 100
    spot_check_cap: int = 2000
    seed: int = 0
    oracle_cap: int = ORACLE_CAP

    def params_for(self, d):
        return self.table.params_for(d, self.precision_bits)


DEFAULT_SETTINGS = Settings()


def setup_logging(log_file=None, level=logging.INFO):
    """
    Log to stdout and, when given, to log_file

    Args:
        log_file (str): Path of the log file
        level (int): Logging level
    """
    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _key_lines(text):
    """Map dotted key paths such as 'weights.even[2]' to 1-based line numbers"""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                child = f"{path}.{key_node.value}" if path else str(key_node.value)
                lines[child] = key_node.start_mark.line + 1
                walk(value_node, child)
        elif isinstance(node, yaml.SequenceNode):
            for index, item in enumerate(node.value):
                child = f"{path}[{index}]"
                lines[child] = item.start_mark.line + 1
                walk(item, child)

    root = yaml.compose(text)
    if root is not None:
        walk(root, '')
    return lines


class _Reader:
    """Typed access to the parsed YAML with errors that cite the line."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def fail(self, path, message):
        line = self.lines.get(path)
        while line is None and '.' in path:
            path = path.rsplit('.', 1)[0]
            line = self.lines.get(path)
        logger.error(f"Config error at {path}: {message}")
        raise ConfigError(f"{path}: {message}", line)

    def section(self, path, allowed):
        value = self.get(path, {})
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for key in value:
            if key not in allowed:
                self.fail(f"{path}.{key}", "unknown key")
        return value

    def get(self, path, default=None):
        node = self.data
        for key in path.split('.'):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def integer(self, path, default, minimum=None):
        value = self.get(path, default)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value}")
        return value

    def boolean(self, path, default):
        value = self.get(path, default)
        if not isinstance(value, bool):
            self.fail(path, f"expected true or false, got {value!r}")
        return value

    def text(self, path, default):
        value = self.get(path, default)
        if not isinstance(value, str) or not value:
            self.fail(path, f"expected a non-empty string, got {value!r}")
        return value

    def real(self, path, default, optional=False):
        value = self.get(path, default)
        if value is None and optional:
            return None
        try:
            return parse_decimal(value)
        except ValueError as e:
            self.fail(path, f"{e}; write reals as quoted strings such as '0.224' or '1/800'")

    def reals(self, path, default, count):
        values = self.get(path, default)
        if not isinstance(values, (list, tuple)) or len(values) != count:
            self.fail(path, f"expected a list of {count} decimal strings")
        return tuple(self.real(f"{path}[{i}]", value) for i, value in enumerate(values))


def _settings_from(data, lines):
    reader = _Reader(data, lines)
    for key in data:
        if key not in _TOP_KEYS:
            reader.fail(str(key), "unknown key")
    reader.section('parameters', _PARAMETER_KEYS)
    reader.section('delta', {'even', 'odd'})
    reader.section('weights', {'even', 'odd'})
    reader.section('sweep', _SWEEP_KEYS)

    base = DEFAULT_TABLE
    table = ParameterTable(
        c=reader.real('parameters.c', base.c),
        epsilon=reader.real('parameters.epsilon', base.epsilon),
        epsilon2=reader.real('parameters.epsilon2', base.epsilon2),
        xi=reader.real('parameters.xi', base.xi),
        delta_even=reader.real('delta.even', base.delta_even),
        delta_odd=reader.real('delta.odd', base.delta_odd),
        weights_even=reader.reals('weights.even', base.weights_even, 7),
        weights_odd=reader.reals('weights.odd', base.weights_odd, 7),
        f_err_max=reader.real('f_err_max', base.f_err_max, optional=True),
        epsilon1=reader.real('epsilon1', base.epsilon1, optional=True),
    )
    defaults = DEFAULT_SETTINGS
    settings = Settings(
        precision_bits=reader.integer('precision_bits', defaults.precision_bits, minimum=53),
        memory_budget_bytes=reader.integer('memory_budget_bytes', defaults.memory_budget_bytes, minimum=1),
        worker_count=reader.integer('worker_count', defaults.worker_count, minimum=1),
        strict_hypotheses=reader.boolean('strict_hypotheses', defaults.strict_hypotheses),
        output_dir=reader.text('output_dir', defaults.output_dir),
        log_file=reader.text('log_file', defaults.log_file),
        table=table,
        checkpoint_every=reader.integer('sweep.checkpoint_every', defaults.checkpoint_every, minimum=1),
        checkpoint_dir=reader.text('sweep.checkpoint_dir', defaults.checkpoint_dir),
        cache_dir=reader.text('sweep.cache_dir', defaults.cache_dir),
        spot_checks=reader.integer('sweep.spot_checks', defaults.spot_checks, minimum=0),
        spot_check_cap=reader.integer('sweep.spot_check_cap', defaults.spot_check_cap, minimum=1),
        seed=reader.integer('sweep.seed', defaults.seed),
        oracle_cap=reader.integer('oracle_cap', defaults.oracle_cap, minimum=1),
    )

    # parity rows are validated once here so a bad value is reported against the file
    for parity, d in (('even', 4), ('odd', 5)):
        try:
            settings.params_for(d)
        except DomainError as e:
            message = str(e)
            if 'weight' in message or 'K1' in message:
                path = f"weights.{parity}"
            elif 'f_err_max' in message:
                path = 'f_err_max'
            elif 'delta' in message:
                path = f"delta.{parity}"
            else:
                path = 'parameters'
            reader.fail(path, message)
    return settings


def parse_config(text):
    """
    Parse config text into Settings

    Raises:
        ConfigError: YAML syntax errors and invalid values, with the line number
    """
    try:
        data = yaml.safe_load(text)
        lines = _key_lines(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        logger.error(f"Error parsing configuration: {e}")
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', None) or e}", line)
    if data is None:
        return DEFAULT_SETTINGS
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1)
    return _settings_from(data, lines)


def load_config(config_file=DEFAULT_CONFIG_FILE):
    """
    Load configuration from YAML file

    Args:
        config_file (str): Path to configuration file

    Returns:
        Settings: Parsed settings
    """
    try:
        with open(config_file, 'r') as file:
            text = file.read()
    except FileNotFoundError:
        logger.error(f"Configuration file {config_file} not found!")
        raise ConfigError(f"configuration file {config_file} not found")
    settings = parse_config(text)
    logger.info(f"Configuration loaded from {config_file}")
    return settings


def load_settings(config_file=None):
    """Explicit files must exist; without one, config.yaml is used when present"""
    if config_file is not None:
        return load_config(config_file)
    if os.path.exists(DEFAULT_CONFIG_FILE):
        return load_config(DEFAULT_CONFIG_FILE)
    logger.info("No config.yaml found, using built-in defaults")
    return DEFAULT_SETTINGS


def with_overrides(settings, **overrides):
    """Settings with the non-None overrides applied, e.g. from command-line flags"""
    return replace(settings, **{key: value for key, value in overrides.items() if value is not None})


def default_fingerprint():
    return DEFAULT_TABLE.fingerprint()
