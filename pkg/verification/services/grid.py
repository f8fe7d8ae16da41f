"""
Periodic grids, spectral fields and Fourier multipliers.

Functions on R^d are represented on the torus [0, L)^d sampled at n points
per dimension. Fourier coefficients follow the convention

    coeff(k) = (1/n^d) * sum_m f(x_m) exp(-2 pi i k.m/n),

so coeff(k) approximates (1/L^d) * integral of exp(-2 pi i xi_k.x) f(x) dx
with xi_k = k/L. Every operator in this module is diagonal in k.
"""
import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .errors import RepresentationError, SingularityError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi ** 2

# Bound on |coeff(0)| under which a field counts as mean-zero.
MEAN_ZERO_TOL = 1e-12

# Largest heat-kernel L^1 mass excess at which T_t still counts as contractive.
HEAT_MASS_TOL = 1e-10

ModeIndex = Union[int, Sequence[int]]


class Representation(enum.Enum):
    PHYSICAL = 'physical'
    FOURIER = 'fourier'


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, period)^dim with n points per dimension."""
    dim: int = 1
    n: int = 64
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        """Trailing array axes holding the spatial dimensions."""
        return tuple(range(-self.dim, 0))

    @property
    def cell_volume(self) -> float:
        return (self.period / self.n) ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer frequency indices k, shape (dim, n, ..., n), in FFT order."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing='ij'))

    @cached_property
    def xi(self) -> np.ndarray:
        """Continuous frequencies xi_k = k / period, shape (dim, n, ..., n)."""
        return self.indices / self.period

    @cached_property
    def radii(self) -> np.ndarray:
        """|xi_k| on the frequency lattice."""
        return np.sqrt(np.sum(self.xi ** 2, axis=0))

    @cached_property
    def points(self) -> np.ndarray:
        """Physical grid points x_m = m * period / n, shape (dim, n, ..., n)."""
        x = np.arange(self.n) * self.period / self.n
        return np.stack(np.meshgrid(*([x] * self.dim), indexing='ij'))

    def min_radius(self) -> float:
        """Smallest nonzero |xi_k|."""
        return 1.0 / self.period

    def max_radius(self) -> float:
        return float(self.radii.max())

    def mode_position(self, k0: ModeIndex) -> Tuple[int, ...]:
        """Array position of integer frequency k0 in FFT order."""
        k0 = (k0,) if np.isscalar(k0) else tuple(k0)
        if len(k0) != self.dim:
            raise ValueError(f"mode {k0} does not match dim={self.dim}")
        half = self.n // 2
        for k in k0:
            if not -half <= k < half:
                raise ValueError(f"mode index {k} outside [-{half}, {half})")
        return tuple(int(k) % self.n for k in k0)

    def to_physical(self, coefficients: np.ndarray) -> np.ndarray:
        """Inverse transform over the trailing spatial axes (batch-aware)."""
        return np.fft.ifftn(coefficients, axes=self.axes) * self.size

    def to_fourier(self, values: np.ndarray) -> np.ndarray:
        """Forward transform over the trailing spatial axes (batch-aware)."""
        return np.fft.fftn(values, axes=self.axes) / self.size

    def lp_norms(self, values: np.ndarray, p: float) -> np.ndarray:
        """Rectangle-rule L^p norms of physical values over the trailing axes."""
        total = np.sum(np.abs(values) ** p, axis=self.axes)
        return (self.cell_volume * total) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field on a grid, stored in one representation.

    Values are copied on construction and made read-only.
    """
    grid: GridSpec
    values: np.ndarray
    representation: Representation = Representation.PHYSICAL

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.size != self.grid.size:
            raise ValueError(
                f"field has {values.size} values, grid expects {self.grid.size}"
            )
        values = values.reshape(self.grid.shape)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def physical(cls, grid: GridSpec, values) -> 'Field':
        return cls(grid, values, Representation.PHYSICAL)

    @classmethod
    def fourier(cls, grid: GridSpec, coefficients) -> 'Field':
        return cls(grid, coefficients, Representation.FOURIER)

    @classmethod
    def zeros(cls, grid: GridSpec) -> 'Field':
        return cls.physical(grid, np.zeros(grid.shape))

    @classmethod
    def plane_wave(cls, grid: GridSpec, k0: ModeIndex, amplitude: complex = 1.0) -> 'Field':
        """Single Fourier mode amplitude * exp(2 pi i k0.x / L), in Fourier form."""
        coefficients = np.zeros(grid.shape, dtype=complex)
        coefficients[grid.mode_position(k0)] = amplitude
        return cls.fourier(grid, coefficients)

    @property
    def is_fourier(self) -> bool:
        return self.representation is Representation.FOURIER

    def coefficients(self) -> np.ndarray:
        if self.is_fourier:
            return self.values
        return self.grid.to_fourier(self.values)

    def physical_values(self) -> np.ndarray:
        if self.is_fourier:
            return self.grid.to_physical(self.values)
        return self.values

    def with_coefficients(self, coefficients: np.ndarray) -> 'Field':
        """New field with the given coefficients, in this field's representation."""
        if self.is_fourier:
            return Field.fourier(self.grid, coefficients)
        return Field.physical(self.grid, self.grid.to_physical(coefficients))

    def zero_mode(self) -> complex:
        return complex(self.coefficients().flat[0])

    def is_mean_zero(self, tol: float = MEAN_ZERO_TOL) -> bool:
        return abs(self.coefficients().flat[0]) <= tol


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier.

    `symbol` maps the frequency array xi of shape (dim, n, ..., n) to the
    symbol values on the lattice; it is evaluated exactly at xi_k.
    """
    symbol: Callable[[np.ndarray], np.ndarray]
    name: str = 'multiplier'

    @classmethod
    def radial(cls, profile: Callable[[np.ndarray], np.ndarray], name: str) -> 'Multiplier':
        return cls(lambda xi: profile(np.sqrt(np.sum(xi ** 2, axis=0))), name)

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            values = np.asarray(self.symbol(grid.xi), dtype=complex)
        return np.broadcast_to(values, grid.shape)

    def __mul__(self, other: 'Multiplier') -> 'Multiplier':
        return Multiplier(
            lambda xi: self.symbol(xi) * other.symbol(xi),
            f"{self.name}*{other.name}",
        )


def forward_transform(f: Field) -> Field:
    """Physical values to Fourier coefficients."""
    if f.is_fourier:
        raise RepresentationError("forward_transform expects a physical field")
    return Field.fourier(f.grid, f.grid.to_fourier(f.values))


def inverse_transform(f: Field) -> Field:
    """Fourier coefficients to physical values."""
    if not f.is_fourier:
        raise RepresentationError("inverse_transform expects a Fourier field")
    return Field.physical(f.grid, f.grid.to_physical(f.values))


def apply_symbol(f: Field, symbol: np.ndarray, name: str = 'symbol') -> Field:
    """Multiply the coefficients of f by a precomputed symbol array."""
    coefficients = f.coefficients()
    needed = coefficients != 0
    if not np.all(np.isfinite(symbol[needed])):
        raise SingularityError(f"{name} is not finite at a frequency carried by the field")
    product = np.where(needed, coefficients * np.where(needed, symbol, 0), 0)
    return f.with_coefficients(product)


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Apply a Fourier multiplier; the result keeps f's representation."""
    return apply_symbol(f, m.evaluate(f.grid), m.name)


def heat_rates(grid: GridSpec) -> np.ndarray:
    """Exponent rates 4 pi^2 |xi|^2 of the heat semigroup."""
    return FOUR_PI_SQ * grid.radii ** 2


def fractional_rates(grid: GridSpec, alpha: float) -> np.ndarray:
    """Exponent rates (2 pi |xi|)^(2 alpha) of the fractional semigroup."""
    return (TWO_PI * grid.radii) ** (2.0 * alpha)


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _check_time(t: float):
    if t < 0:
        raise ValueError(f"semigroup time must be non-negative, got {t}")


@dataclass(frozen=True)
class SemigroupKind:
    """Which semigroup a computation uses: heat, or fractional of order alpha."""
    name: str = 'heat'
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.name == 'heat':
            if self.alpha is not None:
                raise ValueError("the heat semigroup takes no alpha")
        elif self.name == 'fractional':
            _check_alpha(self.alpha if self.alpha is not None else -1.0)
        else:
            raise ValueError(f"unknown semigroup kind '{self.name}'")

    @classmethod
    def heat(cls) -> 'SemigroupKind':
        return cls('heat')

    @classmethod
    def fractional(cls, alpha: float) -> 'SemigroupKind':
        return cls('fractional', float(alpha))

    @property
    def is_fractional(self) -> bool:
        return self.name == 'fractional'

    @property
    def order(self) -> float:
        """alpha for fractional, 1 for heat: the scaling exponent is 2*order."""
        return self.alpha if self.is_fractional else 1.0

    @property
    def label(self) -> str:
        return f"fractional(alpha={self.alpha:g})" if self.is_fractional else 'heat'

    def rates(self, grid: GridSpec) -> np.ndarray:
        if self.is_fractional:
            return fractional_rates(grid, self.alpha)
        return heat_rates(grid)

    def decay_exponent(self, j: float) -> float:
        """Dyadic time scaling 2^(2 j order) of block j."""
        return 2.0 ** (2.0 * j * self.order)

    def symbol(self, grid: GridSpec, t: float) -> np.ndarray:
        _check_time(t)
        return np.exp(-t * self.rates(grid))

    def apply(self, f: Field, t: float) -> Field:
        return apply_symbol(f, self.symbol(f.grid, t), self.label)

    def describe(self) -> dict:
        if self.is_fractional:
            return {'name': self.name, 'alpha': self.alpha}
        return {'name': self.name}


def heat_semigroup(f: Field, t: float) -> Field:
    """T_t f, the multiplier exp(-4 pi^2 |xi|^2 t)."""
    return SemigroupKind.heat().apply(f, t)


def fractional_semigroup(f: Field, t: float, alpha: float) -> Field:
    """P_t f, the multiplier exp(-t (2 pi |xi|)^(2 alpha))."""
    return SemigroupKind.fractional(alpha).apply(f, t)


def bessel_symbol(grid: GridSpec, s: float) -> np.ndarray:
    return (1.0 + FOUR_PI_SQ * grid.radii ** 2) ** (s / 2.0)


def riesz_symbol(grid: GridSpec, s: float) -> np.ndarray:
    """(2 pi |xi|)^s with the zero mode set to 0 for s != 0."""
    if s == 0:
        return np.ones(grid.shape)
    radii = grid.radii
    nonzero = radii > 0
    return np.where(nonzero, (TWO_PI * np.where(nonzero, radii, 1.0)) ** s, 0.0)


def bessel_potential(f: Field, s: float) -> Field:
    """(I - Laplacian)^(s/2) f."""
    return apply_symbol(f, bessel_symbol(f.grid, s), f"bessel({s:g})")


def riesz_potential(f: Field, s: float) -> Field:
    """(-Laplacian)^(s/2) f on the mean-zero subspace."""
    if s < 0 and not f.is_mean_zero():
        raise SingularityError(
            f"riesz potential of order {s:g} needs a mean-zero field "
            f"(zero mode {abs(f.zero_mode()):.3e})"
        )
    return apply_symbol(f, riesz_symbol(f.grid, s), f"riesz({s:g})")


def lp_norm(f: Field, p: float) -> float:
    """Rectangle-rule L^p norm ((L/n)^d sum |f(x_m)|^p)^(1/p)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(f.grid.lp_norms(f.physical_values(), p))


def heat_mass_excess_bound(grid: GridSpec, t: float) -> float:
    """Upper bound on heat_kernel_mass(grid, t) - 1.

    The grid kernel is the heat symbol cut off at the Nyquist band. It differs
    from the sampled periodized Gaussian, which is positive with unit mass, by
    the discarded tail, so per dimension the mass lies in [1, 1 + 4 S] with

        S = sum_{k >= n/2} exp(-a k^2) <= integral_{n/2 - 1}^inf exp(-a x^2) dx,

    a = 4 pi^2 t / L^2. The bound is 0 at t = 0, where the kernel is the grid
    delta, and grows without limit as t -> 0+ when the Gaussian is narrower
    than a cell.
    """
    _check_time(t)
    if t == 0:
        return 0.0
    a = FOUR_PI_SQ * t / grid.period ** 2
    tail = 0.5 * np.sqrt(np.pi / a) * special.erfc(np.sqrt(a) * (grid.n / 2 - 1))
    return float((1.0 + 4.0 * tail) ** grid.dim - 1.0)


def is_heat_resolved(grid: GridSpec, t: float) -> bool:
    """Whether T_t is an L^1 contraction on this grid within HEAT_MASS_TOL."""
    return heat_mass_excess_bound(grid, t) <= HEAT_MASS_TOL


def heat_kernel_mass(grid: GridSpec, t: float) -> float:
    """L^1 norm of the grid heat kernel at time t.

    Equal to 1 within HEAT_MASS_TOL when is_heat_resolved(grid, t). Below that
    time the truncated symbol rings negative and the mass exceeds 1; the value
    is still returned, with a warning.
    """
    if not is_heat_resolved(grid, t):
        logger.warning(
            "heat kernel at t=%g is unresolved on n=%d (mass excess bound %.3e)",
            t, grid.n, heat_mass_excess_bound(grid, t),
        )
    kernel = Field.fourier(grid, np.exp(-t * heat_rates(grid)) / grid.volume)
    return lp_norm(kernel, 1)


def resample(f: Field, n: int) -> Field:
    """Same function on a grid with n points per dimension.

    Coefficients keep their integer index k; modes that do not exist on the
    target grid are dropped. Exact for fields band-limited below both
    Nyquist bands.
    """
    source = f.grid
    target = GridSpec(source.dim, n, source.period)
    coefficients = f.coefficients()
    out = np.zeros(target.shape, dtype=complex)
    keep = min(source.n, n) // 2
    k = np.arange(-keep, keep)
    src_idx = np.ix_(*([k % source.n] * source.dim))
    dst_idx = np.ix_(*([k % n] * source.dim))
    out[dst_idx] = coefficients[src_idx]
    logger.debug("resampled field from n=%d to n=%d", source.n, n)
    resampled = Field.fourier(target, out)
    return resampled if f.is_fourier else inverse_transform(resampled)
