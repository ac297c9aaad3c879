"""Named model builders for the validation cases and experiments."""

from __future__ import annotations

from .model import (
    Bistable,
    Gaussian,
    Grid,
    InternalEnergy,
    ModelSpec,
    PotentialSpec,
    Quadratic,
)


def grid_1d(half_width: float, dx: float) -> Grid:
    m = round(half_width / dx)
    if abs(m * dx - half_width) > 1e-12 * half_width:
        raise ValueError(f"dx={dx} does not tile [-L, L] with L={half_width}")
    return Grid(1, half_width, m)


def grid_2d(half_width: float, dx: float) -> Grid:
    m = round(half_width / dx)
    if abs(m * dx - half_width) > 1e-12 * half_width:
        raise ValueError(f"dx={dx} does not tile [-L, L] with L={half_width}")
    return Grid(2, half_width, m)


def heat(grid: Grid, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(InternalEnergy.entropy(diffusion), PotentialSpec(), grid)


def porous_medium(grid: Grid, exponent: float, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(InternalEnergy.power(diffusion, exponent), PotentialSpec(), grid)


def linear_fokker_planck(grid: Grid, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(
        InternalEnergy.entropy(diffusion), PotentialSpec(confinement=Quadratic(1.0)), grid
    )


def nonlinear_fokker_planck(grid: Grid, exponent: float = 3.0, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(
        InternalEnergy.power(diffusion, exponent),
        PotentialSpec(confinement=Quadratic(1.0)),
        grid,
    )


def nonlocal_fokker_planck(grid: Grid, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(
        InternalEnergy.entropy(diffusion), PotentialSpec(interaction=Quadratic(1.0)), grid
    )


def bistable_heat(grid: Grid, diffusion: float = 0.25) -> ModelSpec:
    return ModelSpec(
        InternalEnergy.entropy(diffusion), PotentialSpec(confinement=Bistable(1.0)), grid
    )


def bistable_porous_medium(grid: Grid, exponent: float = 3.0, diffusion: float = 1.0) -> ModelSpec:
    return ModelSpec(
        InternalEnergy.power(diffusion, exponent),
        PotentialSpec(confinement=Bistable(1.0)),
        grid,
    )


def aggregation_diffusion(grid: Grid, exponent: float = 3.0, diffusion: float = 0.1,
                          width: float = 0.5) -> ModelSpec:
    """Degenerate diffusion with an attractive Gaussian kernel (metastability)."""
    return ModelSpec(
        InternalEnergy.power(diffusion, exponent),
        PotentialSpec(interaction=Gaussian(width, -1.0)),
        grid,
    )


def flocking(grid: Grid, noise: float, alignment: float = 1.0) -> ModelSpec:
    """Noisy kinetic flocking: entropy diffusion, bistable well, quadratic alignment."""
    return ModelSpec(
        InternalEnergy.entropy(noise),
        PotentialSpec(confinement=Bistable(alignment), interaction=Quadratic(1.0)),
        grid,
    )


def flocking_degenerate(grid: Grid, noise: float, exponent: float = 2.0,
                        regularization: float = 0.0, alignment: float = 1.0) -> ModelSpec:
    """Flocking with power diffusion and optional linear-diffusion regularization."""
    return ModelSpec(
        InternalEnergy.power_plus_entropy(noise, exponent, regularization),
        PotentialSpec(confinement=Bistable(alignment), interaction=Quadratic(1.0)),
        grid,
    )


MODEL_MATRIX = {
    "heat": lambda grid: heat(grid),
    "pme_m2": lambda grid: porous_medium(grid, 2.0),
    "pme_m3": lambda grid: porous_medium(grid, 3.0),
    "linear_fp": lambda grid: linear_fokker_planck(grid),
    "nonlinear_fp": lambda grid: nonlinear_fokker_planck(grid),
    "nonlocal_fp": lambda grid: nonlocal_fokker_planck(grid),
    "bistable": lambda grid: bistable_heat(grid),
    "flocking": lambda grid: flocking(grid, noise=0.5),
}
