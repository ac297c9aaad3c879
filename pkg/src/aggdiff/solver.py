"""Newton solution of the implicit systems and the 1D time step driver.

The schemes' updates are roots of a nonlinear residual. A damped Newton
iteration with vacuum regularization solves them; the second-order scheme's
CFL bound references the *converged* velocities, so it is enforced a
posteriori with time-step halving and re-solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import analysis, scheme1d
from .errors import DomainError, NewtonError, NumericalError, StepError
from .kernels import (
    KernelTable,
    classify_definiteness,
    select_stage_rule,
    tabulate_kernel,
)
from .model import DensityField, ModelSpec, field_values, sample_confinement
from .scheme1d import S2, SchemeConfig, Tridiagonal


@dataclass(frozen=True)
class NewtonConfig:
    """Newton controls. The tolerance is absolute on the max norm of R*dt."""

    tolerance: float = 1e-10
    max_iterations: int = 50
    jacobian_mode: str = "analytic"  # "analytic" | "fd"
    fd_step: float = 1e-7

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("Newton tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("Newton needs at least one iteration")
        if self.jacobian_mode not in ("analytic", "fd"):
            raise DomainError(f"unknown jacobian mode {self.jacobian_mode!r}")


@dataclass
class StepOutcome:
    """Accepted field plus solver telemetry for one time step."""

    field: DensityField
    iterations: int
    residual_norm: float
    dt_used: float
    cfl_retries: int
    energy_before: float | None = None
    energy_after: float | None = None
    row_solves: int = 1


@dataclass(frozen=True)
class SchemeSetup:
    """Pre-tabulated ingredients for stepping one model with one scheme."""

    scheme: SchemeConfig
    model: ModelSpec
    v_table: np.ndarray
    kernel: KernelTable | None

    @property
    def dx(self) -> float:
        return self.model.grid.dx

    @property
    def energy(self):
        return self.model.energy


def build_setup(model: ModelSpec, scheme, stage: str = "auto", theta: float = 2.0) -> SchemeSetup:
    """Tabulate V and W once and resolve the convolution stage rule.

    ``scheme`` is a SchemeConfig (used as-is) or a kind string, in which case
    ``stage`` may be "auto" to pick the rule from the kernel's definiteness.
    """
    v_table = sample_confinement(model.potentials, model.grid)
    if model.interaction is None:
        kernel = None
    else:
        kernel = tabulate_kernel(
            model.interaction, model.grid, singular=model.potentials.interaction_singular
        )
        if kernel.is_zero:
            kernel = None
    if isinstance(scheme, SchemeConfig):
        cfg = scheme
    else:
        if stage == "auto":
            if kernel is None:
                stage_rule = "midpoint"
            else:
                stage_rule = select_stage_rule(classify_definiteness(kernel))
        else:
            stage_rule = stage
        cfg = SchemeConfig(scheme, stage_rule, theta)
    return SchemeSetup(cfg, model, v_table, kernel)


def _solve_linear(jac, rhs):
    if isinstance(jac, Tridiagonal):
        return solve_banded((1, 1), jac.to_banded(), rhs)
    return np.linalg.solve(jac, rhs)


def assemble_jacobian(residual_fn, rho, mode: str = "fd", analytic_fn=None, step: float = 1e-7):
    """Jacobian of residual_fn at rho.

    Finite-difference mode uses column-wise forward differences with
    increment step*max(|rho_j|, 1); analytic mode delegates to the scheme's
    exact assembly.
    """
    if mode == "analytic":
        if analytic_fn is None:
            raise DomainError("analytic jacobian requested but none provided")
        return analytic_fn(rho)
    x = np.asarray(rho, dtype=float)
    f0 = np.asarray(residual_fn(x), dtype=float)
    n = x.size
    jac = np.empty((f0.size, n))
    for j in range(n):
        h = step * max(abs(x[j]), 1.0)
        xj = x.copy()
        xj[j] += h
        jac[:, j] = (np.asarray(residual_fn(xj), dtype=float) - f0) / h
    return jac


def newton_solve(residual_fn, guess, config: NewtonConfig | None = None, jacobian=None):
    """Damped Newton iteration to max-norm tolerance.

    ``jacobian`` is a callable returning a Tridiagonal or dense matrix; when
    absent, finite differences of residual_fn are used. A full step that
    increases the residual norm is halved, up to 30 times per iteration.
    Returns (root, iterations, final_norm).
    """
    cfg = config or NewtonConfig()
    x = np.atleast_1d(np.asarray(guess, dtype=float)).copy()
    scalar = np.ndim(guess) == 0

    def fvec(z):
        return np.atleast_1d(np.asarray(residual_fn(z[0] if scalar else z), dtype=float))

    def evaluate(z):
        r = fvec(z)
        if not np.all(np.isfinite(r)):
            raise NumericalError("residual returned a non-finite value")
        return r

    r = evaluate(x)
    norm = float(np.abs(r).max())
    for iteration in range(1, cfg.max_iterations + 1):
        if norm <= cfg.tolerance:
            return (float(x[0]) if scalar else x), iteration - 1, norm
        if jacobian is not None:
            jac = jacobian(x[0] if scalar else x)
        else:
            jac = assemble_jacobian(fvec, x, mode="fd", step=cfg.fd_step)
        if isinstance(jac, Tridiagonal):
            delta = _solve_linear(jac, -r)
        else:
            jac = np.atleast_2d(np.asarray(jac, dtype=float))
            delta = _solve_linear(jac, -r)
        step_x = x + delta
        r_new = evaluate(step_x)
        norm_new = float(np.abs(r_new).max())
        halvings = 0
        while norm_new > norm and halvings < 30:
            delta *= 0.5
            step_x = x + delta
            r_new = evaluate(step_x)
            norm_new = float(np.abs(r_new).max())
            halvings += 1
        x = step_x
        r = r_new
        norm = norm_new
        if norm <= cfg.tolerance:
            return (float(x[0]) if scalar else x), iteration, norm
    raise NewtonError(
        f"Newton did not reach tolerance {cfg.tolerance:g} in "
        f"{cfg.max_iterations} iterations (best norm {norm:g})",
        best_iterate=(float(x[0]) if scalar else x),
        best_norm=norm,
    )


_UNSET = object()


def implicit_step_1d(rho_old, dt, setup: SchemeSetup, config: NewtonConfig | None = None,
                     v_table=None, kernel=_UNSET, dx=None):
    """One implicit solve of the 1D scheme (no CFL retry logic).

    ``v_table``/``kernel``/``dx`` override the setup's tables (``kernel=None``
    explicitly disables the interaction); the 2D splitting passes per-row
    effective tables through here. Newton converges on the update-form
    residual R*dt. Returns (rho_new, iterations, norm).
    """
    cfg = config or NewtonConfig()
    b = field_values(rho_old)
    v = setup.v_table if v_table is None else v_table
    ker = setup.kernel if kernel is _UNSET else kernel
    h = setup.dx if dx is None else dx
    sch = setup.scheme
    energy = setup.energy

    def f(a):
        return dt * scheme1d.residual(
            sch.kind, a, b, dt, h, energy, v, ker, sch.stage_rule, sch.theta
        )

    if cfg.jacobian_mode == "analytic":
        def jac(a):
            j = scheme1d.residual_jacobian(
                sch.kind, a, b, dt, h, energy, v, ker, sch.stage_rule, sch.theta
            )
            return j.scaled(dt) if isinstance(j, Tridiagonal) else dt * j
    else:
        jac = None

    return newton_solve(f, b.copy(), cfg, jacobian=jac)


MAX_CFL_HALVINGS = 20


def advance_step_1d(rho_old, dt_request, scheme, model: ModelSpec | None = None,
                    config: NewtonConfig | None = None, setup: SchemeSetup | None = None,
                    compute_energy: bool = True) -> StepOutcome:
    """Advance one 1D time step, enforcing the S1 CFL bound a posteriori.

    S2 accepts the requested dt unconditionally. S1 solves, evaluates its
    CFL bound with the converged velocities, and halves dt with a re-solve
    on violation (at most 20 halvings). The accepted field must conserve
    mass and stay non-negative within solver tolerance.
    """
    cfg = config or NewtonConfig()
    if setup is None:
        if model is None:
            raise DomainError("advance_step_1d needs a model or a prebuilt setup")
        setup = build_setup(model, scheme)
    b = field_values(rho_old)
    grid = setup.model.grid
    sch = setup.scheme

    energy_before = None
    if compute_energy:
        energy_before = analysis.discrete_energy(
            np.maximum(b, 0.0), setup.model, setup.kernel
        ).total

    dt = float(dt_request)
    retries = 0
    while True:
        try:
            a, iters, norm = implicit_step_1d(b, dt, setup, cfg)
        except NewtonError:
            # S1's implicit system may be unsolvable well above its CFL
            # bound; treat a failed solve like a bound violation and retry
            # smaller. S2 reports non-convergence instead of guessing.
            if sch.kind == S2 or retries >= MAX_CFL_HALVINGS:
                raise
            dt *= 0.5
            retries += 1
            continue
        if sch.kind == S2:
            break
        faces = scheme1d.face_data(
            sch.kind, a, b, setup.dx, setup.energy, setup.v_table, setup.kernel,
            sch.stage_rule, sch.theta,
        )
        bound = scheme1d.max_stable_dt(sch.kind, faces.velocity, setup.dx, order=2)
        if dt <= bound * (1.0 + 1e-12):
            break
        if retries >= MAX_CFL_HALVINGS:
            raise StepError(
                f"CFL halving exhausted after {retries} retries (dt={dt:g}, bound={bound:g})"
            )
        dt *= 0.5
        retries += 1

    _check_step_postconditions(a, b, grid.cell_measure, cfg.tolerance)

    energy_after = None
    if compute_energy:
        energy_after = analysis.discrete_energy(
            np.maximum(a, 0.0), setup.model, setup.kernel
        ).total

    field = DensityField(a, grid, min_allowed=10.0 * cfg.tolerance)
    return StepOutcome(field, iters, norm, dt, retries, energy_before, energy_after)


def _check_step_postconditions(a, b, measure, tol):
    slack = 10.0 * tol
    if a.min() < -slack:
        raise StepError(f"accepted field dips to {a.min():g}, below -10*tol")
    mass_new = a.sum() * measure
    mass_old = b.sum() * measure
    if abs(mass_new - mass_old) > slack * (1.0 + abs(mass_old)):
        raise StepError(
            f"mass drifted by {mass_new - mass_old:g} over one step"
        )
