"""Fully discrete 1D schemes: reconstruction, upwind fluxes, residuals.

Two implicit schemes share the skeleton

    (rho_i^{n+1} - rho_i^n)/dt + (F_{i+1/2} - F_{i-1/2})/dx = 0,
    u_{i+1/2} = -(xi_{i+1} - xi_i)/dx,
    xi_i = H'(rho_i^{n+1}) + V_i + (W * rho**)_i,

with no-flux walls (boundary fluxes are hard zeros). The second-order scheme
upwinds minmod-reconstructed face values of the *old* state; the first-order
one upwinds the unknown state itself, which buys unconditional positivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import toeplitz

from .errors import DomainError
from .kernels import EXPLICIT, IMPLICIT, MIDPOINT, convolve
from .model import InternalEnergy, field_values

S1 = "s1"  # second order in space, CFL-conditional guarantees
S2 = "s2"  # first order, unconditional guarantees
SCHEME_KINDS = (S1, S2)


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    stage_rule: str = MIDPOINT
    theta: float = 2.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise DomainError(f"unknown scheme kind {self.kind!r}")
        if not 1.0 <= self.theta <= 2.0:
            raise DomainError("limiter parameter theta must lie in [1, 2]")


class FaceData(NamedTuple):
    """Per-face velocities and fluxes plus the cell potential xi.

    ``velocity`` and ``flux`` cover the 2M-1 interior faces; the boundary
    fluxes are identically zero and are not stored.
    """

    velocity: np.ndarray
    flux: np.ndarray
    xi: np.ndarray


def minmod(z1, z2, z3):
    """Smallest-magnitude slope when all arguments agree in sign, else 0."""
    z1, z2, z3 = np.broadcast_arrays(
        np.asarray(z1, dtype=float), np.asarray(z2, dtype=float), np.asarray(z3, dtype=float)
    )
    all_pos = (z1 > 0) & (z2 > 0) & (z3 > 0)
    all_neg = (z1 < 0) & (z2 < 0) & (z3 < 0)
    mn = np.minimum(np.minimum(z1, z2), z3)
    mx = np.maximum(np.maximum(z1, z2), z3)
    out = np.where(all_pos, mn, np.where(all_neg, mx, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def reconstruct_faces(rho, theta: float = 2.0):
    """East/west face values from limited slopes; preserves non-negativity.

    The two wall cells get zero slope (first order at the walls), which keeps
    the no-flux boundary exact and positivity trivial there.
    """
    r = field_values(rho)
    n = r.size
    slopes_dx = np.zeros(n)  # slope * dx
    if n >= 3:
        fwd = r[2:] - r[1:-1]
        bwd = r[1:-1] - r[:-2]
        slopes_dx[1:-1] = minmod(theta * fwd, 0.5 * (fwd + bwd), theta * bwd)
    east = r + 0.5 * slopes_dx
    west = r - 0.5 * slopes_dx
    return east, west


def convolution_stage(rho_new, rho_old, stage_rule: str):
    """The density fed to the convolution for a given stage rule."""
    if stage_rule == EXPLICIT:
        return rho_old
    if stage_rule == IMPLICIT:
        return rho_new
    if stage_rule == MIDPOINT:
        return 0.5 * (rho_new + rho_old)
    raise DomainError(f"unknown stage rule {stage_rule!r}")


def chemical_potential(rho_new, rho_conv, energy: InternalEnergy, v_table, kernel):
    """xi_i = H'(max(rho_i, eps)) + V_i + (W * rho_conv)_i."""
    xi = energy.slope_regularized(field_values(rho_new)) + np.asarray(v_table, dtype=float)
    if kernel is not None and not kernel.is_zero:
        xi = xi + convolve(kernel, rho_conv)
    return xi


def face_velocities(xi, dx: float) -> np.ndarray:
    """u_{i+1/2} = -(xi_{i+1} - xi_i)/dx on the interior faces."""
    return -np.diff(np.asarray(xi, dtype=float)) / dx


def assemble_flux(kind: str, velocity, rho_new, east=None, west=None) -> np.ndarray:
    """Upwind flux per interior face; walls carry no flux.

    S1 upwinds the reconstructed old-state face values; S2 upwinds the
    unknown state itself.
    """
    u = np.asarray(velocity, dtype=float)
    up = np.maximum(u, 0.0)
    um = np.minimum(u, 0.0)
    if kind == S1:
        if east is None or west is None:
            raise DomainError("S1 flux needs reconstructed face values")
        return east[:-1] * up + west[1:] * um
    if kind == S2:
        r = field_values(rho_new)
        return r[:-1] * up + r[1:] * um
    raise DomainError(f"unknown scheme kind {kind!r}")


def _flux_divergence(flux, dx: float) -> np.ndarray:
    # (F_{i+1/2} - F_{i-1/2})/dx with zero boundary fluxes.
    padded = np.concatenate(([0.0], flux, [0.0]))
    return np.diff(padded) / dx


def face_data(kind, rho_new, rho_old, dx, energy, v_table, kernel, stage_rule,
              theta: float = 2.0) -> FaceData:
    """Velocities, fluxes and xi for a candidate new state."""
    a = field_values(rho_new)
    b = field_values(rho_old)
    conv_arg = convolution_stage(a, b, stage_rule)
    xi = chemical_potential(a, conv_arg, energy, v_table, kernel)
    u = face_velocities(xi, dx)
    if kind == S1:
        east, west = reconstruct_faces(b, theta)
        flux = assemble_flux(S1, u, a, east, west)
    else:
        flux = assemble_flux(S2, u, a)
    return FaceData(u, flux, xi)


def residual(kind, rho_new, rho_old, dt, dx, energy, v_table, kernel, stage_rule,
             theta: float = 2.0, faces_out: list | None = None) -> np.ndarray:
    """R_i = (rho_new - rho_old)/dt + (F_{i+1/2} - F_{i-1/2})/dx.

    R = 0 characterizes the scheme's update. Defined for any real rho_new
    (H' is evaluated above the vacuum floor), so Newton may probe freely.
    ``faces_out``, if given, receives the FaceData of the evaluation.
    """
    a = field_values(rho_new)
    b = field_values(rho_old)
    conv_arg = convolution_stage(a, b, stage_rule)
    xi = chemical_potential(a, conv_arg, energy, v_table, kernel)
    u = face_velocities(xi, dx)
    if kind == S1:
        east, west = reconstruct_faces(b, theta)
        flux = assemble_flux(S1, u, a, east, west)
    else:
        flux = assemble_flux(S2, u, a)
    if faces_out is not None:
        faces_out.append(FaceData(u, flux, xi))
    return (a - b) / dt + _flux_divergence(flux, dx)


class Tridiagonal(NamedTuple):
    """Tridiagonal matrix in banded layout for scipy.linalg.solve_banded."""

    lower: np.ndarray  # sub-diagonal, length n-1
    diag: np.ndarray   # length n
    upper: np.ndarray  # super-diagonal, length n-1

    def to_banded(self) -> np.ndarray:
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.upper, 1)
            + np.diag(self.lower, -1)
        )

    def scaled(self, c: float) -> "Tridiagonal":
        return Tridiagonal(c * self.lower, c * self.diag, c * self.upper)


def residual_jacobian(kind, rho_new, rho_old, dt, dx, energy, v_table, kernel,
                      stage_rule, theta: float = 2.0):
    """Exact Jacobian of ``residual`` with respect to rho_new.

    Returns a Tridiagonal when the convolution does not couple the unknowns
    (no kernel, or explicit staging); otherwise a dense matrix -- the
    implicit convolution makes every cell feel every other.
    """
    a = field_values(rho_new)
    b = field_values(rho_old)
    n = a.size
    conv_arg = convolution_stage(a, b, stage_rule)
    xi = chemical_potential(a, conv_arg, energy, v_table, kernel)
    u = face_velocities(xi, dx)
    pos = u > 0
    neg = u < 0

    # d xi_i / d a_i from the diffusion term (vacuum-floored).
    g = energy.curvature_regularized(a)

    if kind == S1:
        east, west = reconstruct_faces(b, theta)
        m_face = np.where(pos, east[:-1], 0.0) + np.where(neg, west[1:], 0.0)
    else:
        m_face = np.where(pos, a[:-1], 0.0) + np.where(neg, a[1:], 0.0)

    kernel_couples = (
        kernel is not None and not kernel.is_zero and stage_rule in (IMPLICIT, MIDPOINT)
    )

    if not kernel_couples:
        # dF_j/da_j = [S2] u_j^+ + m_j g_j / dx ; dF_j/da_{j+1} = [S2] u_j^- - m_j g_{j+1}/dx
        dF_dleft = m_face * g[:-1] / dx
        dF_dright = -m_face * g[1:] / dx
        if kind == S2:
            dF_dleft = dF_dleft + np.maximum(u, 0.0)
            dF_dright = dF_dright + np.minimum(u, 0.0)
        inv_dt = 1.0 / dt
        diag = np.full(n, inv_dt)
        diag[:-1] += dF_dleft / dx     # +dF_i/da_i from the right face of cell i
        diag[1:] += -dF_dright / dx    # -dF_{i-1}/da_i from the left face
        upper = dF_dright[:] / dx      # +dF_i/da_{i+1}
        lower = -dF_dleft[:] / dx      # -dF_{i-1}/da_{i-1}
        return Tridiagonal(lower, diag, upper)

    c_rule = 1.0 if stage_rule == IMPLICIT else 0.5
    w = kernel.values
    col = w[n - 1 : 2 * n - 1]      # W at offsets 0..n-1
    row = w[n - 1 :: -1][:n]        # W at offsets 0..-(n-1)
    dxi = c_rule * kernel.cell_measure * toeplitz(col, row)
    dxi[np.diag_indices(n)] += g
    du = (dxi[:-1, :] - dxi[1:, :]) / dx  # du_j/da = -(dxi_{j+1} - dxi_j)/dx
    dF = m_face[:, None] * du
    if kind == S2:
        idx = np.arange(n - 1)
        dF[idx, idx] += np.maximum(u, 0.0)
        dF[idx, idx + 1] += np.minimum(u, 0.0)
    jac = np.zeros((n, n))
    jac[:-1, :] += dF / dx
    jac[1:, :] -= dF / dx
    jac[np.diag_indices(n)] += 1.0 / dt
    return jac


def max_stable_dt(kind, velocity, dx, order: int = 2) -> float:
    """Largest dt guaranteeing positivity for the given face velocities.

    S2 is unconditional (+inf). For S1 the second-order bound is
    dx / (2 max_faces max(u^+, -u^-)); the first-order variant uses the
    per-cell spread (u_{i+1/2})^+ - (u_{i-1/2})^-.
    """
    if kind == S2:
        return np.inf
    u = np.asarray(velocity, dtype=float)
    if u.size == 0:
        return np.inf
    if order == 2:
        peak = np.max(np.maximum(np.maximum(u, 0.0), np.maximum(-u, 0.0)))
        if peak == 0.0:
            return np.inf
        return dx / (2.0 * peak)
    if order == 1:
        up = np.concatenate((np.maximum(u, 0.0), [0.0]))   # right face of each cell
        um = np.concatenate(([0.0], np.minimum(u, 0.0)))   # left face of each cell
        spread = np.max(up - um)
        if spread == 0.0:
            return np.inf
        return dx / spread
    raise DomainError("order must be 1 or 2")
