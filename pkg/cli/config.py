"""
Job Configuration
Load and validate the JSON job file
"""

import json
import logging
from dataclasses import dataclass, replace

from core.errors import ConfigError
from bridge.convergence import DEFAULT_ALPHAS
from comparison.method_comparator import METHOD_ORDER, ordered_methods
from stochastic.model import Family
from stochastic.sampler import check_seed, check_count

logger = logging.getLogger(__name__)

DEFAULT_MC_COUNT = 1_000_000


@dataclass(frozen=True)
class BridgeConfig:
    """
    Convergence scan settings

    Attributes:
        rho: Density analog matrix as nested lists
        alphas: Dispersion scales
    """

    rho: list
    alphas: tuple = DEFAULT_ALPHAS


@dataclass(frozen=True)
class JobConfig:
    """
    One job file

    Attributes:
        expression: Source of f
        mean: m_x as a list (estimate jobs)
        covariance: B_x as nested lists (estimate jobs)
        family: Sampling family tag
        methods: Requested estimators in canonical order
        mc_count: Monte Carlo samples (base count for bridge rows)
        seed: 64-bit unsigned seed
        bridge: BridgeConfig or None
    """

    expression: str
    mean: list = None
    covariance: list = None
    family: str = Family.GAUSSIAN.value
    methods: tuple = ()
    mc_count: int = DEFAULT_MC_COUNT
    seed: int = 0
    bridge: BridgeConfig = None

    def with_overrides(self, seed=None, mc_count=None):
        """
        Apply command-line overrides

        Args:
            seed: Replacement seed or None
            mc_count: Replacement sample count or None

        Returns:
            JobConfig
        """
        changes = {}
        if seed is not None:
            changes['seed'] = _seed(seed)
        if mc_count is not None:
            changes['mc_count'] = _count(mc_count, 'mc_count')
        return replace(self, **changes) if changes else self


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _vector(value, name):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty array of numbers")
    return [_number(v, f"{name}[{i}]") for i, v in enumerate(value)]


def _matrix(value, name):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty array of arrays")
    rows = [_vector(row, f"{name}[{i}]") for i, row in enumerate(value)]
    if any(len(row) != len(rows) for row in rows):
        raise ConfigError(f"{name} must be square")
    return rows


def _seed(value):
    try:
        return check_seed(value)
    except ConfigError as error:
        raise ConfigError(f"seed: {error}") from None


def _count(value, name):
    try:
        return check_count(value)
    except ConfigError:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}") from None


def parse_config(data, command='estimate'):
    """
    Validate a decoded job document

    Args:
        data: Dictionary from the JSON file
        command: 'estimate' or 'bridge'

    Returns:
        JobConfig

    Raises:
        ConfigError: Missing or malformed fields
    """
    if not isinstance(data, dict):
        raise ConfigError('job file must contain a JSON object')

    known = {'expression', 'mean', 'covariance', 'family', 'methods', 'mc_count', 'seed', 'bridge'}
    extra = sorted(key for key in data if key not in known)
    if extra:
        logger.warning(f"Ignoring unknown config fields: {extra}")

    expression = data.get('expression')
    if not isinstance(expression, str) or not expression.strip():
        raise ConfigError('expression must be a non-empty string')

    family = data.get('family', Family.GAUSSIAN.value)
    Family.parse(family)

    config = JobConfig(
        expression=expression,
        family=family,
        mc_count=_count(data.get('mc_count', DEFAULT_MC_COUNT), 'mc_count'),
        seed=_seed(data.get('seed', 0)),
    )

    if command == 'estimate':
        for key in ('mean', 'covariance', 'methods'):
            if key not in data:
                raise ConfigError(f"estimate job needs '{key}'")
        methods = data['methods']
        if not isinstance(methods, list) or not methods:
            raise ConfigError('methods must be a non-empty array')
        unknown = [m for m in methods if m not in METHOD_ORDER]
        if unknown:
            raise ConfigError(f"unknown methods {unknown} (choose from {list(METHOD_ORDER)})")
        config = replace(
            config,
            mean=_vector(data['mean'], 'mean'),
            covariance=_matrix(data['covariance'], 'covariance'),
            methods=tuple(ordered_methods(methods)),
        )
    elif command == 'bridge':
        bridge = data.get('bridge')
        if not isinstance(bridge, dict):
            raise ConfigError("bridge job needs a 'bridge' object")
        if 'rho' not in bridge:
            raise ConfigError("bridge needs 'rho'")
        alphas = bridge.get('alphas', list(DEFAULT_ALPHAS))
        alphas = tuple(_vector(alphas, 'bridge.alphas'))
        if any(a <= 0 for a in alphas):
            raise ConfigError('bridge.alphas must all be positive')
        config = replace(config, bridge=BridgeConfig(rho=_matrix(bridge['rho'], 'bridge.rho'), alphas=alphas))
    else:
        raise ConfigError(f"unknown command {command!r}")

    return config


def load_config(path, command='estimate'):
    """
    Read and validate a job file

    Args:
        path: Path to the JSON document
        command: 'estimate' or 'bridge'

    Returns:
        JobConfig

    Raises:
        ConfigError: Unreadable file, invalid JSON or invalid fields
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as error:
        raise ConfigError(f"cannot read {path}: {error.strerror}") from None
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path} is not valid JSON: {error.msg} (line {error.lineno})") from None

    config = parse_config(data, command)
    logger.info(f"Loaded {command} job from {path}")
    return config
