"""
Experiment configuration: a versioned JSON document naming a grid, a time
grid, a Levy measure, a field recipe, exponent lists and one check.

Unknown keys are rejected and every failure raises ConfigError naming the
dotted path of the offending field.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from django.conf import settings

from .convolution import Scheme, SpaceTimeField, TimeGrid
from .errors import ConfigError
from .grid import GridSpec, SemigroupKind
from .levy import (
    AtomicMeasure, DensityMeasure, LevyMeasureSpec, PowerLawJumps, UniformJumps,
    truncate_small_jumps,
)
from .recipes import build_field, get_recipe, get_recipe_names

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

TOP_LEVEL_KEYS = (
    'schema_version', 'name', 'grid', 'time', 'levy', 'field_recipe', 'exponents',
    'kind', 'scheme', 'check', 'samples', 'seed', 'workers', 'output_path',
)

REQUIRED = object()


# Value validators: return the normalized value or raise ValueError.

def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _positive_int(value) -> int:
    value = _int(value)
    if value < 1:
        raise ValueError(f"must be >= 1, got {value}")
    return value


def _at_least_two(value) -> int:
    value = _int(value)
    if value < 2:
        raise ValueError(f"must be >= 2, got {value}")
    return value


def _number(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _positive(value) -> float:
    value = _number(value)
    if not value > 0:
        raise ValueError(f"must be positive, got {value}")
    return value


def _above_one(value) -> float:
    value = _number(value)
    if not value > 1:
        raise ValueError(f"must be > 1, got {value}")
    return value


def _fraction(value) -> float:
    value = _number(value)
    if not 0 < value <= 1:
        raise ValueError(f"must lie in (0, 1], got {value}")
    return value


def _bool(value) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _optional_str(value) -> Optional[str]:
    if value is not None and not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _list_of(item: Callable[[Any], Any], nonempty: bool = True) -> Callable[[Any], list]:
    def validate(value) -> list:
        if not isinstance(value, list):
            raise ValueError(f"expected a list, got {value!r}")
        if nonempty and not value:
            raise ValueError("must not be empty")
        return [item(v) for v in value]
    return validate


def _pair(value) -> list:
    value = _list_of(_number)(value)
    if len(value) != 2 or not value[0] < value[1]:
        raise ValueError(f"expected [low, high] with low < high, got {value}")
    return value


def _choice(*options: str) -> Callable[[Any], str]:
    def validate(value) -> str:
        if value not in options:
            raise ValueError(f"must be one of {', '.join(options)}, got {value!r}")
        return value
    return validate


def _dotted(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _section(data: Any, path: str, spec: Dict[str, Tuple[Any, Callable]]) -> Dict[str, Any]:
    """Validate a mapping against {key: (default, validator)}."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    unknown = sorted(set(data) - set(spec))
    if unknown:
        raise ConfigError(_dotted(path, unknown[0]), "unknown field")
    values = {}
    for key, (default, validate) in spec.items():
        if key not in data:
            if default is REQUIRED:
                raise ConfigError(_dotted(path, key), "required field is missing")
            values[key] = default
            continue
        try:
            values[key] = validate(data[key])
        except ValueError as e:
            raise ConfigError(_dotted(path, key), str(e)) from None
    return values


# Check parameter schemas

@dataclass(frozen=True)
class CheckSpec:
    """Parameters a check accepts and the exponent lists it fans out over."""
    params: Dict[str, Tuple[Any, Callable]]
    exponents: Tuple[str, ...] = ()
    stochastic: bool = False


DEFAULT_SCALED_TIMES = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]

CHECKS: Dict[str, CheckSpec] = {
    'partition': CheckSpec({'profile': (None, _optional_str)}),
    'lemma1': CheckSpec({
        'j_range': (REQUIRED, _list_of(_int)),
        't_list': (DEFAULT_SCALED_TIMES, _list_of(_positive)),
        'scaled': (True, _bool),
        'fit_window': ([1.0, 10.0], _pair),
        'r_squared_min': (0.99, _fraction),
        'collapse_tolerance': (0.05, _positive),
    }),
    'lemma2': CheckSpec({
        'j_range': (REQUIRED, _list_of(_int)),
        't_list': ([0.0] + DEFAULT_SCALED_TIMES, _list_of(_number)),
        'trials': (10, _positive_int),
        'scaled': (True, _bool),
        'inputs': ('random', _choice('random', 'single_mode')),
    }, exponents=('p',)),
    'lemma3': CheckSpec({
        'j_count': (REQUIRED, _positive_int),
        'trials': (REQUIRED, _positive_int),
        'index_mode': ('nonneg', _choice('nonneg', 'all_integers')),
        'c': (1.0, _positive),
        'refine': (True, _bool),
    }, exponents=('p',)),
    'prop1': CheckSpec({
        'homogeneous': (False, _bool),
        'refine': (True, _bool),
    }, exponents=('p',)),
    'reduction': CheckSpec({}, exponents=('p',)),
    'theorem': CheckSpec({'homogeneous': (False, _bool)}, exponents=('p', 'k'), stochastic=True),
    'corollary': CheckSpec({
        'norm_pair': ('H<-H', _choice('H<-H', 'B<-B', 'Hdot<-Hdot', 'Bdot<-Bdot')),
        'embedding_trials': (100, _positive_int),
    }, exponents=('p', 'k'), stochastic=True),
    'isometry': CheckSpec({}, stochastic=True),
    'kunita': CheckSpec({
        'configs': (20, _at_least_two),
        'slope': (1.0, _number),
    }, exponents=('p',), stochastic=True),
    'k_reduction': CheckSpec({'homogeneous': (False, _bool)}, exponents=('p', 'k'), stochastic=True),
    'quadratic_variation': CheckSpec({'refine': (True, _bool)}, exponents=('p',)),
    'isomorphism': CheckSpec({
        'ks': ([-1.0, 0.0, 1.0], _list_of(_number)),
        'ss': ([-2.0, 1.0, 2.0], _list_of(_number)),
        'trials': (10, _positive_int),
    }),
    'horizon_sweep': CheckSpec({
        'horizons': ([0.25, 0.5, 1.0, 2.0], _list_of(_positive)),
        'homogeneous': (True, _bool),
    }, exponents=('p',)),
}

FRACTIONAL_CHECKS = ('lemma1', 'lemma2', 'prop1', 'theorem')


def get_check_names() -> List[str]:
    return sorted(CHECKS)


# Levy measure descriptions

def _atom(value) -> list:
    if not isinstance(value, list) or len(value) != 2:
        raise ValueError(f"atoms are [size, rate] pairs, got {value!r}")
    return [_number(value[0]), _number(value[1])]


LEVY_KINDS: Dict[str, Dict[str, Tuple[Any, Callable]]] = {
    'atoms': {
        'kind': (REQUIRED, str),
        'atoms': (REQUIRED, _list_of(_atom, nonempty=False)),
    },
    'uniform': {
        'kind': (REQUIRED, str),
        'low': (REQUIRED, _positive),
        'high': (REQUIRED, _positive),
        'mass': (1.0, _positive),
        'symmetric': (False, _bool),
    },
    'power_law': {
        'kind': (REQUIRED, str),
        'gamma': (REQUIRED, _positive),
        'low': (0.0, _number),
        'high': (1.0, _positive),
        'scale': (1.0, _positive),
        'symmetric': (False, _bool),
        'epsilon': (None, lambda v: None if v is None else _positive(v)),
    },
}

DEFAULT_LEVY = {'kind': 'atoms', 'atoms': [[1.0, 1.0], [-1.0, 1.0]]}


def _levy_section(data: Any) -> Dict[str, Any]:
    data = DEFAULT_LEVY if data is None else data
    if not isinstance(data, dict):
        raise ConfigError('levy', "expected an object")
    kind = data.get('kind')
    if kind not in LEVY_KINDS:
        raise ConfigError('levy.kind', f"must be one of {', '.join(LEVY_KINDS)}, got {kind!r}")
    values = _section(data, 'levy', LEVY_KINDS[kind])
    try:
        build_measure(values)
    except ValueError as e:
        raise ConfigError('levy', str(e)) from None
    return values


def build_measure(description: Dict[str, Any]) -> LevyMeasureSpec:
    """Levy measure from a validated description."""
    kind = description['kind']
    if kind == 'atoms':
        return AtomicMeasure(tuple((z, rate) for z, rate in description['atoms']))
    if kind == 'uniform':
        return DensityMeasure(UniformJumps(description['low'], description['high'],
                                           description['mass'], description['symmetric']))
    law = PowerLawJumps(description['gamma'], description['low'], description['high'],
                        description['scale'], description['symmetric'])
    if description.get('epsilon') is not None:
        measure, report = truncate_small_jumps(law, description['epsilon'])
        logger.info("power-law jumps truncated at %g: discarded variance %.3e",
                    report.epsilon, report.discarded_variance)
        return measure
    return DensityMeasure(law)


def _recipe_section(data: Any) -> Tuple[str, Dict[str, Any]]:
    data = {'name': 'zero'} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError('field_recipe', "expected an object")
    unknown = sorted(set(data) - {'name', 'params'})
    if unknown:
        raise ConfigError(f"field_recipe.{unknown[0]}", "unknown field")
    recipe = get_recipe(data.get('name'))
    if recipe is None:
        raise ConfigError('field_recipe.name',
                          f"must be one of {', '.join(get_recipe_names())}, got {data.get('name')!r}")
    params = data.get('params') or {}
    if not isinstance(params, dict):
        raise ConfigError('field_recipe.params', "expected an object")
    for key in params:
        if key not in recipe.params:
            raise ConfigError(f"field_recipe.params.{key}", "unknown field")
    for key in recipe.required:
        if key not in params:
            raise ConfigError(f"field_recipe.params.{key}", "required field is missing")
    return recipe.name, dict(params)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment. `to_dict` round-trips through `from_dict`."""
    check: str
    check_params: Dict[str, Any]
    grid: GridSpec = GridSpec()
    time: TimeGrid = TimeGrid(1.0, 100)
    levy: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_LEVY))
    field_recipe: str = 'zero'
    field_params: Dict[str, Any] = field(default_factory=dict)
    ps: Tuple[float, ...] = (2.0,)
    ks: Tuple[float, ...] = (0.0,)
    alphas: Tuple[float, ...] = ()
    kind: str = 'heat'
    scheme: str = Scheme.EXACT_JUMP.value
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    name: str = 'experiment'
    output_path: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Any) -> 'ExperimentConfig':
        if not isinstance(data, dict):
            raise ConfigError('config', "expected a JSON object")
        unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        if data.get('schema_version') != SCHEMA_VERSION:
            raise ConfigError('schema_version',
                              f"expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")

        top = _section({k: v for k, v in data.items() if k not in ('grid', 'time', 'levy',
                                                                    'field_recipe', 'exponents', 'check')},
                       '', {
                           'schema_version': (SCHEMA_VERSION, _int),
                           'name': ('experiment', str),
                           'kind': ('heat', _choice('heat', 'fractional')),
                           'scheme': (Scheme.EXACT_JUMP.value, _choice(*(s.value for s in Scheme))),
                           'samples': (1000, _at_least_two),
                           'seed': (getattr(settings, 'LEVY_HEAT_SEED', 0), _int),
                           'workers': (getattr(settings, 'LEVY_HEAT_WORKERS', 1), _positive_int),
                           'output_path': (None, _optional_str),
                       })

        grid_values = _section(data.get('grid'), 'grid', {
            'dim': (1, _int), 'n': (64, _int), 'period': (1.0, _positive),
        })
        try:
            grid = GridSpec(**grid_values)
        except ValueError as e:
            raise ConfigError('grid', str(e)) from None

        time_values = _section(data.get('time'), 'time', {
            'T': (1.0, _positive), 'steps': (100, _positive_int),
        })
        time = TimeGrid(time_values['T'], time_values['steps'])

        exponents = _section(data.get('exponents'), 'exponents', {
            'p': ([2.0], _list_of(_number)),
            'k': ([0.0], _list_of(_number)),
            'alpha': ([], _list_of(_number, nonempty=False)),
        })
        for p in exponents['p']:
            if p < 1:
                raise ConfigError('exponents.p', f"every p must be >= 1, got {p}")
        for alpha in exponents['alpha']:
            if not 0 < alpha < 1:
                raise ConfigError('exponents.alpha', f"every alpha must lie in (0, 1), got {alpha}")
        if top['kind'] == 'fractional' and not exponents['alpha']:
            raise ConfigError('exponents.alpha', "fractional experiments need at least one alpha")

        check_data = data.get('check')
        if not isinstance(check_data, dict):
            raise ConfigError('check', "expected an object with a 'name'")
        check_name = check_data.get('name')
        if check_name not in CHECKS:
            raise ConfigError('check.name', f"must be one of {', '.join(get_check_names())}, "
                                            f"got {check_name!r}")
        spec = CHECKS[check_name]
        check_params = _section({k: v for k, v in check_data.items() if k != 'name'},
                                'check', spec.params)
        if check_name == 'lemma3':
            for p in exponents['p']:
                if not p > 1:
                    raise ConfigError('exponents.p', f"lemma3 needs p > 1, got {p}")

        levy = _levy_section(data.get('levy'))
        recipe, params = _recipe_section(data.get('field_recipe'))

        return cls(
            check=check_name,
            check_params=check_params,
            grid=grid,
            time=time,
            levy=levy,
            field_recipe=recipe,
            field_params=params,
            ps=tuple(exponents['p']),
            ks=tuple(exponents['k']),
            alphas=tuple(exponents['alpha']),
            kind=top['kind'],
            scheme=top['scheme'],
            samples=top['samples'],
            seed=top['seed'],
            workers=top['workers'],
            name=top['name'],
            output_path=top['output_path'],
        )

    @classmethod
    def load(cls, path) -> 'ExperimentConfig':
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError('config', f"no such file: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError('config', f"invalid JSON in {path}: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'name': self.name,
            'grid': {'dim': self.grid.dim, 'n': self.grid.n, 'period': self.grid.period},
            'time': {'T': self.time.horizon, 'steps': self.time.steps},
            'levy': dict(self.levy),
            'field_recipe': {'name': self.field_recipe, 'params': dict(self.field_params)},
            'exponents': {'p': list(self.ps), 'k': list(self.ks), 'alpha': list(self.alphas)},
            'kind': self.kind,
            'scheme': self.scheme,
            'check': {'name': self.check, **self.check_params},
            'samples': self.samples,
            'seed': self.seed,
            'workers': self.workers,
            'output_path': self.output_path,
        }

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        """Copy with CLI overrides (seed, workers, output_path); None means keep."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @property
    def spec(self) -> CheckSpec:
        return CHECKS[self.check]

    def semigroups(self) -> List[SemigroupKind]:
        if self.kind == 'fractional':
            return [SemigroupKind.fractional(alpha) for alpha in self.alphas]
        return [SemigroupKind.heat()]

    def measure(self) -> LevyMeasureSpec:
        return build_measure(self.levy)

    def build_field(self) -> SpaceTimeField:
        return build_field(self.field_recipe, self.grid, self.time, self.field_params)

    def fan_out(self) -> List[Dict[str, Any]]:
        """One dict of (kind, p, k) per run the check asks for."""
        exponents = self.spec.exponents
        runs = []
        for kind in self.semigroups():
            for p in (self.ps if 'p' in exponents else (self.ps[0],)):
                for k in (self.ks if 'k' in exponents else (self.ks[0],)):
                    runs.append({'kind': kind, 'p': p, 'k': k})
        return runs
