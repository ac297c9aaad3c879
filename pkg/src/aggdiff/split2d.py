"""Two-dimensional stepping: dimensional splitting and sweeping splitting.

A 2D step is an x-direction pass followed by a y-direction pass. When the
convolution is frozen over a pass (no interaction, or explicit staging), the
rows decouple and each advances independently by the 1D scheme. When the
interaction is staged implicitly or at the midpoint, rows do not decouple;
the sweeping form restores tractability by updating one row at a time, the
convolution seeing the stage-rule value on the active row and the latest
frozen values elsewhere. Each sweep stage is then exactly a 1D implicit
solve with an effective confinement table.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from . import analysis, scheme1d
from .errors import NewtonError, RoutingError, StepError
from .kernels import EXPLICIT, convolve, make_kernel_1d
from .model import DensityField, field_values
from .scheme1d import S2
from .solver import (
    MAX_CFL_HALVINGS,
    NewtonConfig,
    SchemeSetup,
    StepOutcome,
    implicit_step_1d,
)


class PassTelemetry:
    """Counters accumulated over one directional pass."""

    def __init__(self):
        self.row_solves = 0
        self.newton_iterations = 0
        self.max_velocity = 0.0
        self.worst_norm = 0.0

    def absorb(self, iters, norm, velocity):
        self.row_solves += 1
        self.newton_iterations += iters
        self.worst_norm = max(self.worst_norm, norm)
        if velocity.size:
            self.max_velocity = max(self.max_velocity, float(np.abs(velocity).max()))


def _axis_view(field, axis, index):
    """The 1D line of a field along ``axis`` at position ``index``.

    axis 0 sweeps the x-direction (row j = index varies i); axis 1 sweeps y.
    """
    return field[:, index] if axis == 0 else field[index, :]


def _set_axis(field, axis, index, line):
    if axis == 0:
        field[:, index] = line
    else:
        field[index, :] = line


def _row_kernel(setup: SchemeSetup, axis: int):
    """1D kernel slice that couples cells within one line of the sweep."""
    if setup.kernel is None:
        return None
    return make_kernel_1d(setup.kernel.axis_slice(axis), setup.kernel.cell_measure)


def _full_convolution(setup: SchemeSetup, field):
    if setup.kernel is None:
        return None
    return convolve(setup.kernel, field)


def _convolution_increment(setup, axis, index, delta):
    """Update of W * field when one line changes by ``delta``.

    The increment is a 1D convolution of delta against every offset slice of
    the kernel, evaluated in one pass along the sweep axis.
    """
    w = setup.kernel.values
    n = delta.size
    if axis == 0:
        # Field changed on column j=index: increment[:, l] from slice (l-index).
        g = fftconvolve(w, delta[:, None], axes=0)[n - 1 : 2 * n - 1, :]
        block = g[:, n - 1 - index : 2 * n - 1 - index]
    else:
        g = fftconvolve(w, delta[None, :], axes=1)[:, n - 1 : 2 * n - 1]
        block = g[n - 1 - index : 2 * n - 1 - index, :]
    return block * setup.kernel.cell_measure


def advance_split_axis(rho, axis, dt, setup: SchemeSetup, config: NewtonConfig | None = None,
                       telemetry: PassTelemetry | None = None) -> np.ndarray:
    """One decoupled directional pass: every line advances independently.

    Requires the convolution to be frozen over the pass (W absent, or the
    explicit stage rule); with an implicit or midpoint stage the lines
    couple and the sweeping form must be used instead.
    """
    field = field_values(rho)
    sch = setup.scheme
    if setup.kernel is not None and sch.stage_rule != EXPLICIT:
        raise RoutingError(
            "dimensional splitting does not decouple with an implicitly staged "
            "interaction; use sweeping"
        )
    cfg = config or NewtonConfig()
    tel = telemetry if telemetry is not None else PassTelemetry()
    n = setup.model.grid.n_cells
    conv = _full_convolution(setup, field)  # frozen over the pass
    out = field.copy()
    for r in range(n):
        v_eff = _axis_view(setup.v_table, axis, r).copy()
        if conv is not None:
            v_eff += _axis_view(conv, axis, r)
        old_line = _axis_view(field, axis, r)
        new_line, iters, norm = implicit_step_1d(
            old_line, dt, setup, cfg, v_table=v_eff, kernel=None
        )
        faces = scheme1d.face_data(
            sch.kind, new_line, old_line, setup.dx, setup.energy, v_eff, None,
            EXPLICIT, sch.theta,
        )
        tel.absorb(iters, norm, faces.velocity)
        _set_axis(out, axis, r, new_line)
    return out


def advance_sweep_axis(rho, axis, dt, setup: SchemeSetup, config: NewtonConfig | None = None,
                       telemetry: PassTelemetry | None = None, stage_hook=None) -> np.ndarray:
    """One sweeping directional pass: lines update sequentially.

    At stage r only line r changes; its implicit 1D solve sees the
    interaction of the whole field through an effective confinement, with
    the stage rule applied to line r's own contribution. The running
    convolution is updated incrementally after each stage (one kernel-slice
    product per stage, matching a full re-convolution to roundoff).
    """
    field = field_values(rho).copy()
    sch = setup.scheme
    cfg = config or NewtonConfig()
    tel = telemetry if telemetry is not None else PassTelemetry()
    n = setup.model.grid.n_cells
    if setup.kernel is None:
        # No coupling: the sweep degenerates to the decoupled pass.
        return advance_split_axis(field, axis, dt, setup, cfg, tel)

    row_kernel = _row_kernel(setup, axis)
    conv = _full_convolution(setup, field)
    out = field
    for r in range(n):
        old_line = _axis_view(out, axis, r).copy()
        background = _axis_view(conv, axis, r) - convolve(row_kernel, old_line)
        v_eff = _axis_view(setup.v_table, axis, r) + background
        new_line, iters, norm = implicit_step_1d(
            old_line, dt, setup, cfg, v_table=v_eff, kernel=row_kernel
        )
        faces = scheme1d.face_data(
            sch.kind, new_line, old_line, setup.dx, setup.energy,
            v_eff, row_kernel, sch.stage_rule, sch.theta,
        )
        tel.absorb(iters, norm, faces.velocity)
        _set_axis(out, axis, r, new_line)
        delta = new_line - old_line
        if np.any(delta):
            conv += _convolution_increment(setup, axis, r, delta)
        if stage_hook is not None:
            stage_hook(axis, r, out)
    return out


def _pass_cfl_bound(setup: SchemeSetup, telemetry: PassTelemetry) -> float:
    if setup.scheme.kind == S2:
        return np.inf
    if telemetry.max_velocity == 0.0:
        return np.inf
    return setup.dx / (2.0 * telemetry.max_velocity)


def advance_step_2d(rho, dt_request, setup: SchemeSetup, config: NewtonConfig | None = None,
                    compute_energy: bool = True) -> StepOutcome:
    """One full 2D step: x-pass then y-pass, routed to split or sweep.

    S1 enforces the split CFL bound (the minimum of the per-pass face-velocity
    bounds) a posteriori, halving dt and retrying the whole step on violation.
    """
    cfg = config or NewtonConfig()
    field = field_values(rho)
    grid = setup.model.grid
    sch = setup.scheme
    decoupled = setup.kernel is None or sch.stage_rule == EXPLICIT
    advance = advance_split_axis if decoupled else advance_sweep_axis

    energy_before = None
    if compute_energy:
        energy_before = analysis.discrete_energy(
            np.maximum(field, 0.0), setup.model, setup.kernel
        ).total

    dt = float(dt_request)
    retries = 0
    while True:
        tel = PassTelemetry()
        try:
            half = advance(field, 0, dt, setup, cfg, tel)
            full = advance(half, 1, dt, setup, cfg, tel)
        except NewtonError:
            # As in 1D: an S1 solve failing above its CFL bound retries
            # smaller; S2 reports non-convergence.
            if sch.kind == S2 or retries >= MAX_CFL_HALVINGS:
                raise
            dt *= 0.5
            retries += 1
            continue
        if sch.kind == S2:
            break
        bound = _pass_cfl_bound(setup, tel)
        if dt <= bound * (1.0 + 1e-12):
            break
        if retries >= MAX_CFL_HALVINGS:
            raise StepError(
                f"CFL halving exhausted after {retries} retries (dt={dt:g}, bound={bound:g})"
            )
        dt *= 0.5
        retries += 1

    slack = 10.0 * cfg.tolerance
    if full.min() < -slack:
        raise StepError(f"accepted field dips to {full.min():g}, below -10*tol")
    mass_new = full.sum() * grid.cell_measure
    mass_old = field.sum() * grid.cell_measure
    if abs(mass_new - mass_old) > slack * (1.0 + abs(mass_old)):
        raise StepError(f"mass drifted by {mass_new - mass_old:g} over one step")

    energy_after = None
    if compute_energy:
        energy_after = analysis.discrete_energy(
            np.maximum(full, 0.0), setup.model, setup.kernel
        ).total

    out_field = DensityField(full, grid, min_allowed=slack)
    return StepOutcome(
        out_field, tel.newton_iterations, tel.worst_norm, dt, retries,
        energy_before, energy_after, row_solves=tel.row_solves,
    )
