"""
Littlewood-Paley partition of unity and Besov/Sobolev norms.

The low-frequency cutoff psi_hat(xi) = chi(|xi|) and the dyadic blocks
phi_hat_j(xi) = chi(|xi| / 2^j) - chi(|xi| / 2^(j-1)) are evaluated on
the grid frequencies; every projection is a Fourier multiplier.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from django.conf import settings
from django.core.cache import cache

from .errors import SingularityError
from .grid import Field, GridSpec, bessel_symbol, riesz_symbol, MEAN_ZERO_TOL

logger = logging.getLogger(__name__)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """h(x) = exp(-1/x) for x > 0, 0 otherwise."""
    x = np.asarray(x, dtype=float)
    positive = x > 0
    return np.where(positive, np.exp(-1.0 / np.where(positive, x, 1.0)), 0.0)


def bump_quotient(r: np.ndarray) -> np.ndarray:
    """chi(r) = h(2 - r) / (h(2 - r) + h(r - 1)): 1 on [0, 1], 0 on [2, inf)."""
    upper = _smooth_step(2.0 - r)
    lower = _smooth_step(np.asarray(r, dtype=float) - 1.0)
    return upper / (upper + lower)


# Profile registry
PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'bump_quotient': bump_quotient,
}

DEFAULT_PROFILE = 'bump_quotient'


def get_profile(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Get a radial profile by name."""
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(
            f"unknown partition profile '{name}'; available: {', '.join(sorted(PROFILES))}"
        ) from None


def _floor_log2(x: float) -> int:
    mantissa, exponent = math.frexp(x)
    return exponent - 1


def _ceil_log2(x: float) -> int:
    mantissa, exponent = math.frexp(x)
    return exponent - 1 if mantissa == 0.5 else exponent


@dataclass(frozen=True)
class DyadicPartition:
    """Dyadic blocks resolved by a grid.

    j_min is the first block that is nonzero on some grid frequency;
    j_max is the first index with 2^(j-1) >= max |xi_k|, so that
    chi(|xi| / 2^j_max) = 1 on the whole lattice.
    """
    grid: GridSpec
    j_min: int
    j_max: int
    profile_name: str = DEFAULT_PROFILE

    @property
    def psi_profile(self) -> Callable[[np.ndarray], np.ndarray]:
        return get_profile(self.profile_name)

    def low_symbol(self) -> np.ndarray:
        return self.psi_profile(self.grid.radii)

    def block_symbol(self, j: int) -> np.ndarray:
        chi = self.psi_profile
        radii = self.grid.radii
        return chi(radii / 2.0 ** j) - chi(radii / 2.0 ** (j - 1))

    def block_indices(self, homogeneous: bool) -> range:
        """Blocks entering a norm: j_min..j_max (homogeneous) or 1..j_max."""
        if homogeneous:
            return range(self.j_min, self.j_max + 1)
        return range(1, self.j_max + 1)

    def check_index(self, j: int):
        if not self.j_min <= j <= self.j_max:
            raise ValueError(
                f"block index {j} outside resolved range [{self.j_min}, {self.j_max}]"
            )


def build_partition(grid: GridSpec, profile: str = DEFAULT_PROFILE) -> DyadicPartition:
    """
    Build (or fetch from the cache) the dyadic partition resolved by a grid.
    """
    get_profile(profile)
    cache_key = f"lp_partition_{grid.dim}_{grid.n}_{grid.period!r}_{profile}"
    cached = cache.get(cache_key)
    if cached is not None:
        return cached

    partition = DyadicPartition(
        grid=grid,
        j_min=_floor_log2(grid.min_radius()),
        j_max=_ceil_log2(grid.max_radius()) + 1,
        profile_name=profile,
    )
    logger.debug(
        "built partition for %s: j in [%d, %d]", grid, partition.j_min, partition.j_max
    )
    cache_timeout = getattr(settings, 'SPECTRAL_CACHE_TIMEOUT', 3600)
    cache.set(cache_key, partition, cache_timeout)
    return partition


def partition_defect(partition: DyadicPartition, homogeneous: bool = False) -> float:
    """Max deviation of the partition of unity over the resolved lattice."""
    total = sum(partition.block_symbol(j) for j in partition.block_indices(homogeneous))
    radii = partition.grid.radii
    if homogeneous:
        nonzero = radii > 0
        return float(np.max(np.abs(1.0 - total[nonzero])))
    total = total + partition.low_symbol()
    return float(np.max(np.abs(1.0 - total)))


def project_block(f: Field, j: int) -> Field:
    """phi_j * f."""
    partition = build_partition(f.grid)
    partition.check_index(j)
    return f.with_coefficients(f.coefficients() * partition.block_symbol(j))


def project_low(f: Field) -> Field:
    """psi * f."""
    partition = build_partition(f.grid)
    return f.with_coefficients(f.coefficients() * partition.low_symbol())


def _require_mean_zero(coefficients: np.ndarray, grid: GridSpec, what: str):
    zero_modes = np.abs(coefficients.reshape(-1, grid.size)[:, 0])
    if np.any(zero_modes > MEAN_ZERO_TOL):
        raise SingularityError(f"homogeneous {what} needs mean-zero fields")


def block_norm_table(
    coefficients: np.ndarray, grid: GridSpec, p: float, homogeneous: bool = False,
) -> Tuple[List[int], np.ndarray, np.ndarray]:
    """
    L^p norms of every dyadic block for a stack of coefficient arrays.

    Returns (block indices, block norms with shape (blocks, *batch), low-block
    norms with shape batch). Low-block norms are zero when homogeneous.
    """
    partition = build_partition(grid)
    js = list(partition.block_indices(homogeneous))
    batch_shape = coefficients.shape[:coefficients.ndim - grid.dim]
    norms = np.empty((len(js),) + batch_shape)
    for row, j in enumerate(js):
        block = grid.to_physical(coefficients * partition.block_symbol(j))
        norms[row] = grid.lp_norms(block, p)
    if homogeneous:
        low = np.zeros(batch_shape)
    else:
        low = grid.lp_norms(grid.to_physical(coefficients * partition.low_symbol()), p)
    return js, norms, low


def besov_norms(
    coefficients: np.ndarray, grid: GridSpec, k: float, p: float, homogeneous: bool = False,
) -> np.ndarray:
    """Besov B^k_{p,p} norms of a stack of coefficient arrays."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if homogeneous:
        _require_mean_zero(coefficients, grid, 'Besov norm')
    js, norms, low = block_norm_table(coefficients, grid, p, homogeneous)
    weights = (2.0 ** (k * np.asarray(js, dtype=float))).reshape((-1,) + (1,) * low.ndim)
    dyadic = np.sum((weights * norms) ** p, axis=0) ** (1.0 / p)
    return low + dyadic


def sobolev_norms(
    coefficients: np.ndarray, grid: GridSpec, k: float, p: float, homogeneous: bool = False,
) -> np.ndarray:
    """Sobolev H^k_p norms of a stack of coefficient arrays."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if homogeneous:
        if k < 0:
            _require_mean_zero(coefficients, grid, 'Sobolev norm')
        symbol = riesz_symbol(grid, k)
    else:
        symbol = bessel_symbol(grid, k)
    return grid.lp_norms(grid.to_physical(coefficients * symbol), p)


def besov_norm(f: Field, k: float, p: float, homogeneous: bool = False) -> float:
    """
    Nonhomogeneous: ||psi*f||_p + (sum_{j>=1} (2^{kj} ||phi_j*f||_p)^p)^(1/p).
    Homogeneous: the dyadic sum over j_min..j_max only, on mean-zero f.
    """
    return float(besov_norms(f.coefficients(), f.grid, k, p, homogeneous))


def sobolev_norm(f: Field, k: float, p: float, homogeneous: bool = False) -> float:
    """||(I - Laplacian)^(k/2) f||_p, or ||(-Laplacian)^(k/2) f||_p if homogeneous."""
    return float(sobolev_norms(f.coefficients(), f.grid, k, p, homogeneous))


def block_norms(f: Field, p: float, homogeneous: bool = False) -> List[Tuple[int, float]]:
    """[(j, ||phi_j * f||_p)] over the blocks entering the norm."""
    js, norms, _ = block_norm_table(f.coefficients(), f.grid, p, homogeneous)
    return [(j, float(norm)) for j, norm in zip(js, norms)]
