"""
Finite-activity Levy measures and compensated compound Poisson paths.

A measure is either a finite list of atoms (z_i, lambda_i) or a density on
R \\ {0} given by a jump law: an object with a density `__call__`, the
support `intervals` (each on one side of 0), and a `sample(rng, size)`
method drawing from the normalized law. Paths carry their compensator
drift mu_1 = int z nu(dz) so that X_t = sum_{tau_i <= t} z_i - t mu_1 is a
martingale.
"""
import logging
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from .errors import InfiniteMomentError

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]

QUAD_EPSREL = 1e-8


def _check_intervals(intervals: Sequence[Interval]) -> Tuple[Interval, ...]:
    checked = []
    for low, high in intervals:
        if not low < high:
            raise ValueError(f"empty support interval ({low}, {high})")
        if low < 0 < high:
            raise ValueError(f"support interval ({low}, {high}) contains 0")
        checked.append((float(low), float(high)))
    return tuple(checked)


def _outside(intervals: Sequence[Interval], epsilon: float) -> Tuple[Interval, ...]:
    """Intersect intervals with {|z| >= epsilon}."""
    kept = []
    for low, high in intervals:
        if low >= 0:
            low = max(low, epsilon)
        else:
            high = min(high, -epsilon)
        if low < high:
            kept.append((low, high))
    return tuple(kept)


def _inside(intervals: Sequence[Interval], epsilon: float) -> Tuple[Interval, ...]:
    """Intersect intervals with {|z| < epsilon}."""
    kept = []
    for low, high in intervals:
        if low >= 0:
            high = min(high, epsilon)
        else:
            low = max(low, -epsilon)
        if low < high:
            kept.append((low, high))
    return tuple(kept)


def _integrate(func: Callable[[float], float], intervals: Sequence[Interval], what: str) -> float:
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        for low, high in intervals:
            try:
                value, _ = integrate.quad(func, low, high, epsrel=QUAD_EPSREL, limit=200)
            except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as e:
                raise InfiniteMomentError(f"{what} diverges on ({low}, {high}): {e}")
            total += value
    if not np.isfinite(total):
        raise InfiniteMomentError(f"{what} is not finite")
    return total


# Jump laws

@dataclass(frozen=True)
class UniformJumps:
    """Density mass/(high-low) on [low, high] (mirrored to [-high, -low] and
    split evenly when symmetric)."""
    low: float
    high: float
    mass: float = 1.0
    symmetric: bool = False

    def __post_init__(self):
        if not 0 < self.low < self.high:
            raise ValueError("uniform jumps need 0 < low < high")
        if self.mass <= 0:
            raise ValueError("uniform jumps need a positive mass")

    @property
    def intervals(self) -> Tuple[Interval, ...]:
        if self.symmetric:
            return ((-self.high, -self.low), (self.low, self.high))
        return ((self.low, self.high),)

    def __call__(self, z):
        a = np.abs(z) if self.symmetric else np.asarray(z)
        level = self.mass / (self.high - self.low) / (2.0 if self.symmetric else 1.0)
        return np.where((a >= self.low) & (a <= self.high), level, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        sizes = rng.uniform(self.low, self.high, size)
        if self.symmetric:
            sizes = sizes * rng.choice([-1.0, 1.0], size)
        return sizes

    def restrict(self, epsilon: float) -> Optional['UniformJumps']:
        if epsilon >= self.high:
            return None
        if epsilon <= self.low:
            return self
        kept = self.mass * (self.high - epsilon) / (self.high - self.low)
        return UniformJumps(epsilon, self.high, kept, self.symmetric)

    def describe(self) -> dict:
        return {'kind': 'uniform', 'low': self.low, 'high': self.high,
                'mass': self.mass, 'symmetric': self.symmetric}


@dataclass(frozen=True)
class PowerLawJumps:
    """Density scale * |z|^(-1-gamma) on low <= |z| <= high.

    low = 0 gives an infinite-activity law, usable only through
    truncate_small_jumps.
    """
    gamma: float
    low: float = 0.0
    high: float = 1.0
    scale: float = 1.0
    symmetric: bool = False

    def __post_init__(self):
        if not 0 < self.gamma < 2:
            raise ValueError("power-law jumps need 0 < gamma < 2")
        if not 0 <= self.low < self.high:
            raise ValueError("power-law jumps need 0 <= low < high")
        if self.scale <= 0:
            raise ValueError("power-law jumps need a positive scale")

    @property
    def intervals(self) -> Tuple[Interval, ...]:
        if self.symmetric:
            return ((-self.high, -self.low), (self.low, self.high))
        return ((self.low, self.high),)

    def __call__(self, z):
        a = np.abs(np.asarray(z, dtype=float)) if self.symmetric else np.asarray(z, dtype=float)
        inside = (a >= self.low) & (a <= self.high) & (a > 0)
        return np.where(inside, self.scale * np.where(inside, a, 1.0) ** (-1.0 - self.gamma), 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.low == 0:
            raise ValueError("cannot sample an infinite-activity power law; truncate it first")
        g = self.gamma
        u = rng.uniform(0.0, 1.0, size)
        a, b = self.low ** -g, self.high ** -g
        sizes = (a - u * (a - b)) ** (-1.0 / g)
        if self.symmetric:
            sizes = sizes * rng.choice([-1.0, 1.0], size)
        return sizes

    def restrict(self, epsilon: float) -> Optional['PowerLawJumps']:
        if epsilon >= self.high:
            return None
        return PowerLawJumps(self.gamma, max(self.low, epsilon), self.high, self.scale, self.symmetric)

    def describe(self) -> dict:
        return {'kind': 'power_law', 'gamma': self.gamma, 'low': self.low, 'high': self.high,
                'scale': self.scale, 'symmetric': self.symmetric}


@dataclass(frozen=True)
class TabulatedJumps:
    """Arbitrary density on finite intervals, sampled by a tabulated inverse CDF."""
    density: Callable[[np.ndarray], np.ndarray]
    intervals: Tuple[Interval, ...]
    resolution: int = 4097

    def __post_init__(self):
        object.__setattr__(self, 'intervals', _check_intervals(self.intervals))

    @cached_property
    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        nodes = np.concatenate([np.linspace(lo, hi, self.resolution) for lo, hi in self.intervals])
        weights = np.concatenate([
            integrate.cumulative_trapezoid(self.density(np.linspace(lo, hi, self.resolution)),
                                           np.linspace(lo, hi, self.resolution), initial=0.0)
            for lo, hi in self.intervals
        ])
        # chain the per-interval cumulative masses
        offsets = np.repeat(np.cumsum([0.0] + [
            weights[(i + 1) * self.resolution - 1] for i in range(len(self.intervals) - 1)
        ]), self.resolution)
        cdf = weights + offsets
        return cdf / cdf[-1], nodes

    def __call__(self, z):
        return self.density(z)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cdf, nodes = self._table
        return np.interp(rng.uniform(0.0, 1.0, size), cdf, nodes)

    def restrict(self, epsilon: float) -> Optional['TabulatedJumps']:
        kept = _outside(self.intervals, epsilon)
        if not kept:
            return None
        return TabulatedJumps(self.density, kept, self.resolution)

    def describe(self) -> dict:
        return {'kind': 'tabulated', 'intervals': [list(i) for i in self.intervals]}


JumpLaw = Union[UniformJumps, PowerLawJumps, TabulatedJumps]


# Measures

@dataclass(frozen=True)
class AtomicMeasure:
    """nu = sum_i lambda_i delta_{z_i}."""
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        atoms = tuple((float(z), float(rate)) for z, rate in self.atoms)
        for z, rate in atoms:
            if z == 0:
                raise ValueError("atom sizes must be nonzero")
            if not rate > 0:
                raise ValueError(f"atom rate must be positive, got {rate}")
        object.__setattr__(self, 'atoms', atoms)

    @property
    def total_mass(self) -> float:
        return float(sum(rate for _, rate in self.atoms))

    def moment(self, p: float, signed: bool = False) -> float:
        if signed:
            return float(sum(rate * z for z, rate in self.atoms))
        return float(sum(rate * abs(z) ** p for z, rate in self.atoms))

    def sample_sizes(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.empty(0)
        sizes = np.array([z for z, _ in self.atoms])
        rates = np.array([rate for _, rate in self.atoms])
        return rng.choice(sizes, size=size, p=rates / rates.sum())

    def describe(self) -> dict:
        return {'kind': 'atoms', 'atoms': [[z, rate] for z, rate in self.atoms]}


@dataclass(frozen=True)
class DensityMeasure:
    """nu(dz) = law(z) dz with finite total mass."""
    law: JumpLaw

    def __post_init__(self):
        _check_intervals(self.law.intervals)
        mass = _integrate(lambda z: float(self.law(z)), self.law.intervals, 'total mass')
        if not mass > 0:
            raise ValueError("density measure has zero mass")
        object.__setattr__(self, '_mass', mass)

    @property
    def total_mass(self) -> float:
        return self._mass

    def moment(self, p: float, signed: bool = False) -> float:
        if signed:
            return _integrate(lambda z: z * float(self.law(z)), self.law.intervals, 'mean jump')
        return _integrate(lambda z: abs(z) ** p * float(self.law(z)), self.law.intervals,
                          f"beta_{p:g}")

    def sample_sizes(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.empty(0)
        return np.asarray(self.law.sample(rng, size), dtype=float)

    def describe(self) -> dict:
        return self.law.describe()


LevyMeasureSpec = Union[AtomicMeasure, DensityMeasure]


def symmetric_atoms(size: float = 1.0, rate: float = 1.0) -> AtomicMeasure:
    """Atoms at +size and -size with the same rate."""
    return AtomicMeasure(((size, rate), (-size, rate)))


def beta_moment(nu: LevyMeasureSpec, p: float) -> float:
    """beta_p = int |z|^p nu(dz)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return nu.moment(p)


def mean_jump(nu: LevyMeasureSpec) -> float:
    """mu_1 = int z nu(dz), the compensator drift."""
    return nu.moment(1.0, signed=True)


@dataclass(frozen=True, eq=False)
class JumpPath:
    """Sampled jumps (tau_i, z_i) on (0, horizon] plus the compensator drift."""
    horizon: float
    times: np.ndarray
    sizes: np.ndarray
    mean_rate: float = 0.0

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        sizes = np.array(self.sizes, dtype=float)
        if times.shape != sizes.shape or times.ndim != 1:
            raise ValueError("times and sizes must be 1-d arrays of equal length")
        if times.size:
            if times[0] <= 0 or times[-1] > self.horizon:
                raise ValueError("jump times must lie in (0, horizon]")
            if np.any(np.diff(times) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if np.any(sizes == 0):
                raise ValueError("jump sizes must be nonzero")
        times.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'sizes', sizes)

    @property
    def jump_count(self) -> int:
        return int(self.times.size)

    def value(self, t: float) -> float:
        """X_t = sum_{tau_i <= t} z_i - t mu_1."""
        return increment(self, 0.0, t)

    def scaled(self, factor: float) -> 'JumpPath':
        """Path with every jump size (and the drift) multiplied by factor."""
        return JumpPath(self.horizon, self.times, self.sizes * factor, self.mean_rate * factor)


def sample_path(nu: LevyMeasureSpec, T: float, rng: np.random.Generator) -> JumpPath:
    """
    Compound Poisson path: Poisson(Lambda T) jumps at i.i.d. uniform times in
    (0, T] with i.i.d. sizes from nu / Lambda.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    count = int(rng.poisson(nu.total_mass * T)) if nu.total_mass > 0 else 0
    times = np.sort(T - rng.uniform(0.0, T, count))
    sizes = nu.sample_sizes(rng, count)
    return JumpPath(T, times, sizes, mean_jump(nu))


def increment(path: JumpPath, s: float, t: float) -> float:
    """X_t - X_s = sum_{s < tau_i <= t} z_i - (t - s) mu_1."""
    if s > t:
        raise ValueError(f"increment needs s <= t, got s={s}, t={t}")
    if s < 0 or t > path.horizon:
        raise ValueError(f"increment window [{s}, {t}] outside [0, {path.horizon}]")
    lo = np.searchsorted(path.times, s, side='right')
    hi = np.searchsorted(path.times, t, side='right')
    return float(np.sum(path.sizes[lo:hi])) - (t - s) * path.mean_rate


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators for `count` paths, derived from one master seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


@dataclass(frozen=True)
class TruncationReport:
    epsilon: float
    retained_mass: float
    discarded_variance: float
    dropped_atoms: int = 0


def truncate_small_jumps(
    nu: Union[LevyMeasureSpec, JumpLaw], epsilon: float,
) -> Tuple[LevyMeasureSpec, TruncationReport]:
    """
    Restrict a measure (possibly of infinite activity) to |z| >= epsilon.

    Returns the finite-activity measure and the discarded variance
    int_{|z| < epsilon} z^2 nu(dz).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    if isinstance(nu, AtomicMeasure):
        kept = tuple((z, rate) for z, rate in nu.atoms if abs(z) >= epsilon)
        dropped = [(z, rate) for z, rate in nu.atoms if abs(z) < epsilon]
        truncated = AtomicMeasure(kept) if dropped else nu
        report = TruncationReport(
            epsilon=epsilon,
            retained_mass=truncated.total_mass,
            discarded_variance=float(sum(rate * z * z for z, rate in dropped)),
            dropped_atoms=len(dropped),
        )
        return truncated, report

    law = nu.law if isinstance(nu, DensityMeasure) else nu
    restricted = law.restrict(epsilon)
    if restricted is None:
        raise ValueError(f"no jumps of size >= {epsilon} remain")
    discarded = _integrate(lambda z: z * z * float(law(z)), _inside(law.intervals, epsilon),
                           'discarded variance')
    truncated = DensityMeasure(restricted)
    logger.debug("truncated jumps below %g: mass %g, discarded variance %g",
                 epsilon, truncated.total_mass, discarded)
    return truncated, TruncationReport(epsilon, truncated.total_mass, discarded)
