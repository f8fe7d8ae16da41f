"""
Named, versioned generators for the forcing field g.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .convolution import SpaceTimeField, TimeGrid
from .grid import Field, GridSpec, lp_norm


def random_decay_field(
    grid: GridSpec, slope: float, rng: np.random.Generator, mean_zero: bool = True,
) -> Field:
    """Real white noise shaped by (1 + |xi|^2)^(-slope/2), unit L^2 norm.

    The Nyquist modes are dropped so the field survives resampling.
    """
    coefficients = grid.to_fourier(rng.standard_normal(grid.shape))
    coefficients = coefficients * (1.0 + grid.radii ** 2) ** (-slope / 2.0)
    coefficients[np.any(grid.indices == -(grid.n // 2), axis=0)] = 0.0
    if mean_zero:
        coefficients.flat[0] = 0.0
    field = Field.fourier(grid, coefficients)
    norm = lp_norm(field, 2)
    return Field.fourier(grid, coefficients / norm) if norm > 0 else field


def _zero(grid: GridSpec, tgrid: TimeGrid, params: dict) -> SpaceTimeField:
    return SpaceTimeField.zeros(tgrid, grid)


def _single_mode(grid: GridSpec, tgrid: TimeGrid, params: dict) -> SpaceTimeField:
    frame = Field.plane_wave(grid, params['k0'], params.get('amplitude', 1.0))
    return SpaceTimeField.constant(tgrid, frame)


def _random_decay(grid: GridSpec, tgrid: TimeGrid, params: dict) -> SpaceTimeField:
    rng = np.random.default_rng(params.get('seed', 0))
    slope = params.get('slope', 1.0)
    mean_zero = params.get('mean_zero', True)
    if params.get('time_constant', True):
        return SpaceTimeField.constant(tgrid, random_decay_field(grid, slope, rng, mean_zero))
    frames = tuple(random_decay_field(grid, slope, rng, mean_zero) for _ in range(tgrid.steps + 1))
    return SpaceTimeField(tgrid, frames)


def _step_in_time(grid: GridSpec, tgrid: TimeGrid, params: dict) -> SpaceTimeField:
    """Mode k0 before switch * T, mode k1 (or nothing) afterwards."""
    before = Field.plane_wave(grid, params['k0'])
    after = Field.plane_wave(grid, params['k1']) if params.get('k1') is not None else Field.zeros(grid)
    switch = params.get('switch', 0.5) * tgrid.horizon
    frames = tuple(before if t < switch else after for t in tgrid.nodes)
    return SpaceTimeField(tgrid, frames)


@dataclass(frozen=True)
class FieldRecipe:
    name: str
    version: int
    build: Callable[[GridSpec, TimeGrid, dict], SpaceTimeField]
    params: tuple
    required: tuple = ()


# Recipe registry
RECIPES: Dict[str, FieldRecipe] = {
    'zero': FieldRecipe('zero', 1, _zero, ()),
    'single_mode': FieldRecipe('single_mode', 1, _single_mode, ('k0', 'amplitude'), ('k0',)),
    'random_decay': FieldRecipe(
        'random_decay', 1, _random_decay, ('slope', 'seed', 'mean_zero', 'time_constant'),
    ),
    'step_in_time': FieldRecipe('step_in_time', 1, _step_in_time, ('k0', 'k1', 'switch'), ('k0',)),
}


def get_recipe(name: str) -> Optional[FieldRecipe]:
    """Get a recipe by name, or None if it does not exist."""
    return RECIPES.get(name)


def get_recipe_names() -> List[str]:
    return sorted(RECIPES)


def build_field(name: str, grid: GridSpec, tgrid: TimeGrid, params: Optional[dict] = None) -> SpaceTimeField:
    recipe = get_recipe(name)
    if recipe is None:
        raise ValueError(f"unknown field recipe '{name}'; available: {', '.join(get_recipe_names())}")
    return recipe.build(grid, tgrid, dict(params or {}))
