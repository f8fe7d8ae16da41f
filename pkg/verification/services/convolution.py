"""
Space-time fields and the stochastic convolution u(t) = int_0^t T_{t-s} g(s) dX_s.

g is piecewise constant in time on a uniform grid: on [t_m, t_{m+1}) it
equals its frame g(t_m). Both the heat and the fractional semigroup act
diagonally in Fourier space, so every scheme below works on coefficient
stacks of shape (steps + 1, n, ..., n).
"""
import enum
import logging
import math
import multiprocessing
import pickle
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import SingularityError
from .grid import Field, GridSpec, SemigroupKind
from .levy import (
    JumpPath, LevyMeasureSpec, beta_moment, mean_jump, sample_path,
)
from .littlewood_paley import besov_norms, sobolev_norms

logger = logging.getLogger(__name__)

HEAT = SemigroupKind.heat()


class Scheme(enum.Enum):
    EXACT_JUMP = 'exact_jump'
    EULER_GRID = 'euler_grid'


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_n = n T / M, n = 0..M."""
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.horizon * np.arange(self.steps + 1) / self.steps

    def refined(self, factor: int = 2) -> 'TimeGrid':
        return TimeGrid(self.horizon, self.steps * factor)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """One Field per time node, all on the same grid."""
    tgrid: TimeGrid
    frames: Tuple[Field, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) != self.tgrid.steps + 1:
            raise ValueError(
                f"expected {self.tgrid.steps + 1} frames, got {len(frames)}"
            )
        grid = frames[0].grid
        if any(frame.grid != grid for frame in frames):
            raise ValueError("all frames must share one grid")
        object.__setattr__(self, 'frames', frames)

    @classmethod
    def from_coefficients(cls, tgrid: TimeGrid, grid: GridSpec, coefficients: np.ndarray) -> 'SpaceTimeField':
        return cls(tgrid, tuple(Field.fourier(grid, c) for c in coefficients))

    @classmethod
    def constant(cls, tgrid: TimeGrid, frame: Field) -> 'SpaceTimeField':
        return cls(tgrid, (frame,) * (tgrid.steps + 1))

    @classmethod
    def zeros(cls, tgrid: TimeGrid, grid: GridSpec) -> 'SpaceTimeField':
        return cls.constant(tgrid, Field.zeros(grid))

    @property
    def grid(self) -> GridSpec:
        return self.frames[0].grid

    @cached_property
    def coefficients(self) -> np.ndarray:
        stack = np.stack([frame.coefficients() for frame in self.frames])
        stack.setflags(write=False)
        return stack

    def frame(self, n: int) -> Field:
        return self.frames[n]

    def map_frames(self, fn: Callable[[Field], Field]) -> 'SpaceTimeField':
        return SpaceTimeField(self.tgrid, tuple(fn(frame) for frame in self.frames))

    def is_mean_zero(self) -> bool:
        return all(frame.is_mean_zero() for frame in self.frames)

    def is_time_constant(self) -> bool:
        """True if frames 0..M-1 (the ones any quadrature reads) coincide."""
        coefficients = self.coefficients[:self.tgrid.steps]
        return bool(np.all(coefficients == coefficients[0]))


def _decay(rates: np.ndarray, elapsed: np.ndarray) -> np.ndarray:
    """exp(-elapsed * rates) for a vector of elapsed times, shape (len, *grid)."""
    elapsed = np.asarray(elapsed, dtype=float)
    return np.exp(-elapsed.reshape(elapsed.shape + (1,) * rates.ndim) * rates)


def _cell_integral(rates: np.ndarray, dt: float) -> np.ndarray:
    """int_0^dt exp(-rates * r) dr, equal to dt where rates == 0."""
    positive = rates > 0
    safe = np.where(positive, rates, 1.0)
    return np.where(positive, -np.expm1(-safe * dt) / safe, dt)


def _check_node(tgrid: TimeGrid, n: int, what: str):
    if not 0 <= n <= tgrid.steps:
        raise ValueError(f"{what} node {n} outside 0..{tgrid.steps}")


def evolve(g: SpaceTimeField, t: int, s: int, kind: SemigroupKind = HEAT) -> Field:
    """T_{t_t - t_s} g(t_s) for grid node indices s <= t."""
    _check_node(g.tgrid, t, 't')
    _check_node(g.tgrid, s, 's')
    if s > t:
        raise ValueError(f"evolve needs s <= t, got s={s}, t={t}")
    return kind.apply(g.frame(s), g.tgrid.nodes[t] - g.tgrid.nodes[s])


def _lp_power(grid: GridSpec, values: np.ndarray, p: float) -> np.ndarray:
    """||.||_p^p over the trailing spatial axes."""
    return grid.cell_volume * np.sum(np.abs(values) ** p, axis=grid.axes)


def prop1_lhs(g: SpaceTimeField, p: float, kind: SemigroupKind = HEAT) -> float:
    """
    sum_{n<M} dt sum_{m<n} dt ||T_{t_n - t_m} g(t_m)||_p^p.

    Time-constant fields are summed by lag, which visits the same terms.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    grid, tgrid = g.grid, g.tgrid
    coefficients = g.coefficients
    rates = kind.rates(grid)
    dt, steps = tgrid.dt, tgrid.steps

    if g.is_time_constant():
        total = 0.0
        lags = np.arange(1, steps)
        for chunk in np.array_split(lags, max(1, math.ceil(lags.size / 256))):
            if chunk.size == 0:
                continue
            evolved = grid.to_physical(_decay(rates, chunk * dt) * coefficients[0])
            total += float(np.sum((steps - chunk) * _lp_power(grid, evolved, p)))
        return dt * dt * total

    total = 0.0
    for n in range(1, steps):
        elapsed = tgrid.nodes[n] - tgrid.nodes[:n]
        evolved = grid.to_physical(_decay(rates, elapsed) * coefficients[:n])
        total += float(np.sum(_lp_power(grid, evolved, p)))
    return dt * dt * total


def quadratic_variation_term(g: SpaceTimeField, p: float, kind: SemigroupKind = HEAT) -> float:
    """sum_{n<M} dt int (sum_{m<n} dt |T_{t_n - t_m} g(t_m, x)|^2)^(p/2) dx."""
    grid, tgrid = g.grid, g.tgrid
    coefficients = g.coefficients
    rates = kind.rates(grid)
    total = 0.0
    for n in range(1, tgrid.steps):
        elapsed = tgrid.nodes[n] - tgrid.nodes[:n]
        evolved = grid.to_physical(_decay(rates, elapsed) * coefficients[:n])
        square_function = tgrid.dt * np.sum(np.abs(evolved) ** 2, axis=0)
        total += float(grid.cell_volume * np.sum(square_function ** (p / 2.0)))
    return tgrid.dt * total


def path_increments(path: JumpPath, tgrid: TimeGrid) -> np.ndarray:
    """Compensated increments X_{t_{m+1}} - X_{t_m} for m = 0..M-1."""
    if not math.isclose(path.horizon, tgrid.horizon):
        raise ValueError(
            f"path horizon {path.horizon} does not match time grid horizon {tgrid.horizon}"
        )
    cells = np.searchsorted(tgrid.nodes, path.times, side='left') - 1
    jumps = np.bincount(cells, weights=path.sizes, minlength=tgrid.steps)
    return jumps - tgrid.dt * path.mean_rate


def _drift(coefficients: np.ndarray, tgrid: TimeGrid, rates: np.ndarray) -> np.ndarray:
    """D_n = sum_{m<n} dt T_{t_n - t_m} g(t_m), D_0 = 0."""
    step = np.exp(-tgrid.dt * rates)
    drift = np.zeros_like(coefficients)
    for n in range(tgrid.steps):
        drift[n + 1] = step * (drift[n] + tgrid.dt * coefficients[n])
    return drift


def _exact_jump(coefficients, tgrid, rates, path, drift=None):
    nodes = tgrid.nodes
    u = np.zeros(coefficients.shape, dtype=complex)
    for tau, z in zip(path.times, path.sizes):
        first = int(np.searchsorted(nodes, tau, side='left'))
        frame = int(np.searchsorted(nodes, tau, side='right')) - 1
        u[first:] += z * _decay(rates, nodes[first:] - tau) * coefficients[frame]
    if path.mean_rate != 0:
        if drift is None:
            drift = _drift(coefficients, tgrid, rates)
        u -= path.mean_rate * drift
    return u


def _euler_grid(coefficients, tgrid, rates, path):
    increments = path_increments(path, tgrid)
    step = np.exp(-tgrid.dt * rates)
    u = np.zeros(coefficients.shape, dtype=complex)
    for n in range(tgrid.steps):
        u[n + 1] = step * (u[n] + coefficients[n] * increments[n])
    return u


def _solution_coefficients(coefficients, tgrid, rates, path, scheme, drift=None):
    if not math.isclose(path.horizon, tgrid.horizon):
        raise ValueError(
            f"path horizon {path.horizon} does not match time grid horizon {tgrid.horizon}"
        )
    if scheme is Scheme.EXACT_JUMP:
        return _exact_jump(coefficients, tgrid, rates, path, drift)
    return _euler_grid(coefficients, tgrid, rates, path)


def stochastic_convolution(
    g: SpaceTimeField,
    path: JumpPath,
    scheme: Scheme = Scheme.EXACT_JUMP,
    kind: SemigroupKind = HEAT,
) -> SpaceTimeField:
    """
    u(t_n) = int_0^{t_n} T_{t_n - s} g(s) dX_s on the nodes of g's time grid.

    EXACT_JUMP sums every jump with its exact elapsed time and g taken at the
    last node <= tau_i, minus mu_1 times the left-endpoint drift quadrature.
    EULER_GRID lumps the compensated increment of each cell at its left node.
    """
    u = _solution_coefficients(g.coefficients, g.tgrid, kind.rates(g.grid), path, Scheme(scheme))
    return SpaceTimeField.from_coefficients(g.tgrid, g.grid, u)


class RunningMoments:
    """Streaming mean and variance (Welford)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, value: float):
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (value - self.mean)

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else 0.0


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int

    def power(self, exponent: float) -> 'MonteCarloEstimate':
        """Estimate of mean**exponent with a delta-method standard error."""
        if self.mean <= 0:
            return MonteCarloEstimate(0.0, 0.0, self.samples)
        value = self.mean ** exponent
        return MonteCarloEstimate(value, abs(exponent) * value / self.mean * self.stderr, self.samples)


@dataclass(frozen=True)
class _PathTask:
    coefficients: Optional[np.ndarray]
    grid: GridSpec
    tgrid: TimeGrid
    kind: SemigroupKind
    nu: LevyMeasureSpec
    k: float
    p: float
    homogeneous: bool
    scheme: Scheme
    norm: str
    seeds: Tuple[np.random.SeedSequence, ...]
    g_sampler: Optional[Callable[[np.random.Generator], SpaceTimeField]] = None


def _frame_norms(u: np.ndarray, grid: GridSpec, k: float, p: float, homogeneous: bool, norm: str):
    if norm == 'besov':
        return besov_norms(u, grid, k, p, homogeneous)
    return sobolev_norms(u, grid, k, p, homogeneous)


def _run_paths(task: _PathTask) -> List[float]:
    """Per-path values sum_{n<M} dt ||u(t_n)||^p for a batch of seeds."""
    rates = task.kind.rates(task.grid)
    tgrid = task.tgrid
    shared_drift = None
    values = []
    for seed in task.seeds:
        rng = np.random.default_rng(seed)
        if task.g_sampler is not None:
            g = task.g_sampler(rng)
            if task.homogeneous and not g.is_mean_zero():
                raise SingularityError("homogeneous norm needs mean-zero g frames")
            coefficients, drift = g.coefficients, None
        else:
            coefficients = task.coefficients
            if shared_drift is None and task.scheme is Scheme.EXACT_JUMP and mean_jump(task.nu) != 0:
                shared_drift = _drift(coefficients, tgrid, rates)
            drift = shared_drift
        path = sample_path(task.nu, tgrid.horizon, rng)
        u = _solution_coefficients(coefficients, tgrid, rates, path, task.scheme, drift)
        norms = _frame_norms(u[:tgrid.steps], task.grid, task.k, task.p, task.homogeneous, task.norm)
        values.append(float(tgrid.dt * np.sum(norms ** task.p)))
    return values


def _picklable(obj) -> bool:
    try:
        pickle.dumps(obj)
    except (pickle.PicklingError, AttributeError, TypeError):
        return False
    return True


def mc_solution_norm(
    g: SpaceTimeField,
    nu: LevyMeasureSpec,
    k: float,
    p: float,
    homogeneous: bool = False,
    samples: int = 1000,
    seed: int = 0,
    kind: SemigroupKind = HEAT,
    scheme: Scheme = Scheme.EXACT_JUMP,
    norm: str = 'sobolev',
    workers: int = 1,
    g_sampler: Optional[Callable[[np.random.Generator], SpaceTimeField]] = None,
) -> MonteCarloEstimate:
    """
    Monte Carlo estimate of E sum_{n<M} dt ||u(t_n)||^p_{H^k_p} (or B^k_p).

    Path i uses the i-th child of SeedSequence(seed), so the estimate does
    not depend on the number of workers. `g_sampler`, when given, draws a
    fresh g for each path from that path's generator before its jumps.

    Worker processes receive the sampler and the measure by pickling; when
    either cannot be pickled (a lambda or a closure) the paths run serially
    with a warning.
    """
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    if norm not in ('sobolev', 'besov'):
        raise ValueError(f"norm must be 'sobolev' or 'besov', got '{norm}'")
    if homogeneous and g_sampler is None and not g.is_mean_zero():
        raise SingularityError("homogeneous norm needs mean-zero g frames")

    seeds = tuple(np.random.SeedSequence(seed).spawn(samples))
    workers = max(1, min(int(workers), samples))
    if workers > 1 and not _picklable((g_sampler, nu)):
        logger.warning("g_sampler or the Levy measure cannot be pickled; running %d paths serially",
                       samples)
        workers = 1
    chunks = [seeds[i::workers] for i in range(workers)]
    tasks = [
        _PathTask(
            coefficients=None if g_sampler is not None else np.array(g.coefficients),
            grid=g.grid, tgrid=g.tgrid, kind=kind, nu=nu, k=k, p=p,
            homogeneous=homogeneous, scheme=Scheme(scheme), norm=norm,
            seeds=chunk, g_sampler=g_sampler,
        )
        for chunk in chunks
    ]
    if workers == 1:
        results = [_run_paths(tasks[0])]
    else:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_run_paths, tasks)

    # undo the round-robin split so the reduction order is the path order
    ordered = [None] * samples
    for offset, values in enumerate(results):
        ordered[offset::workers] = values
    moments = RunningMoments()
    for value in ordered:
        moments.push(value)
    logger.debug("mc_solution_norm: %d paths, mean %.6e +- %.2e",
                 samples, moments.mean, moments.stderr)
    return MonteCarloEstimate(moments.mean, moments.stderr, samples)


def isometry_value(
    g: SpaceTimeField,
    nu: LevyMeasureSpec,
    kind: SemigroupKind = HEAT,
    scheme: Scheme = Scheme.EXACT_JUMP,
) -> float:
    """
    Exact E sum_{n<M} dt ||u(t_n)||_2^2 for deterministic g under a scheme.

    EULER_GRID: beta_2 * prop1_lhs(g, 2). EXACT_JUMP: jumps fall anywhere in
    a cell, so the kernel is integrated over the cell; the compensator
    quadrature leaves a deterministic mean mu_1 (int - sum) that is added.
    """
    beta2 = beta_moment(nu, 2)
    if Scheme(scheme) is Scheme.EULER_GRID:
        return beta2 * prop1_lhs(g, 2, kind)

    mu1 = mean_jump(nu)
    grid, tgrid = g.grid, g.tgrid
    coefficients = g.coefficients
    rates = kind.rates(grid)
    dt = tgrid.dt
    step, step2 = np.exp(-dt * rates), np.exp(-2.0 * dt * rates)
    cell, cell2 = _cell_integral(rates, dt), _cell_integral(2.0 * rates, dt)
    variance = np.zeros(grid.shape)
    exact_mean = np.zeros(grid.shape, dtype=complex)
    drift = np.zeros(grid.shape, dtype=complex)
    total = 0.0
    for n in range(tgrid.steps):
        residual = mu1 * (exact_mean - drift)
        total += dt * grid.volume * float(np.sum(beta2 * variance + np.abs(residual) ** 2))
        variance = step2 * variance + cell2 * np.abs(coefficients[n]) ** 2
        exact_mean = step * exact_mean + cell * coefficients[n]
        drift = step * (drift + dt * coefficients[n])
    return total
