"""Curvature operators, multipliers, energy, and the classical inequalities.

The conformal metric is g = e^{2u} g_flat.  Interior Gauss curvature,
boundary geodesic curvature, the auxiliary multipliers alpha and beta, the
energy of the variational problem, conserved mass, and the residuals of
the prescribed-curvature system all live here as pure functions of the
sampled fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .errors import DomainError, StateError
from .grid import BoundaryField, DiscField, DiscGrid


@dataclass
class ProblemData:
    """Prescribed curvature data: interior f > 0 and boundary j > 0.

    j_harm is the harmonic extension of j; f_fn/j_fn are optional callables
    (x, y) -> values used to compose the data with Moebius maps without
    interpolation error.
    """

    f: DiscField
    j: BoundaryField
    j_harm: DiscField = None
    f_fn: object = None
    j_fn: object = None

    def __post_init__(self):
        if np.min(self.f.values) <= 0.0:
            raise DomainError("f must be strictly positive")
        if np.min(self.j.values) <= 0.0:
            raise DomainError("j must be strictly positive")
        if self.j_harm is None:
            self.j_harm = g.harmonic_extension(self.j)
        if np.max(np.abs(self.j_harm.values[0] - self.j.values)) > 1e-10:
            raise ValueError("trace of j_harm does not match j")

    @property
    def grid(self) -> DiscGrid:
        return self.f.grid

    def f_at(self, z) -> np.ndarray:
        """Evaluate f at arbitrary points, exactly if a callable is attached."""
        z = np.asarray(z, dtype=complex)
        if self.f_fn is not None:
            return np.asarray(self.f_fn(z.real, z.imag), dtype=float) * np.ones(z.shape)
        return self.grid.interpolate(self.f.values, z)

    def j_at_angle(self, angles) -> np.ndarray:
        """Evaluate j at arbitrary boundary angles."""
        angles = np.asarray(angles, dtype=float)
        if self.j_fn is not None:
            zb = np.exp(1j * angles)
            return np.asarray(self.j_fn(zb.real, zb.imag), dtype=float) * np.ones(angles.shape)
        return self.grid.interpolate_boundary(self.j.values, angles)


@dataclass
class FlowState:
    """Dynamical state (u, rho, t) of the curvature flow."""

    u: DiscField
    rho: float
    t: float = 0.0

    def require_rho(self):
        if not 0.0 < self.rho < np.pi:
            raise StateError(f"rho = {self.rho} outside (0, pi)")

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.rho, self.t)


@dataclass
class CurvatureData:
    K: DiscField
    k: BoundaryField
    alpha: float
    beta: float


def gauss_curvature(u: DiscField) -> DiscField:
    """K = e^{-2u} (-Lap u)."""
    return DiscField(u.grid, np.exp(-2.0 * u.values) * (-u.grid.laplacian_values(u.values)))


def geodesic_curvature(u: DiscField) -> BoundaryField:
    """k = e^{-u} (du/dnu + 1) on the boundary circle."""
    dn = u.grid.normal_derivative_values(u.values)
    return BoundaryField(u.grid, np.exp(-u.values[0]) * (dn + 1.0))


def curvature_integrals(state: FlowState, data: ProblemData) -> tuple[float, float]:
    """(int_B f e^{2u} dz, int_dB j e^u ds)."""
    gr = state.u.grid
    a = gr.integrate_values(data.f.values * np.exp(2.0 * state.u.values))
    b = gr.integrate_boundary_values(data.j.values * np.exp(state.u.values[0]))
    return a, b


def multipliers(state: FlowState, data: ProblemData) -> tuple[float, float]:
    """alpha = 2 rho / int f e^{2u}, beta = 2 (pi - rho) / int j e^u."""
    state.require_rho()
    fa, jb = curvature_integrals(state, data)
    return 2.0 * state.rho / fa, 2.0 * (np.pi - state.rho) / jb


def energy(state: FlowState, data: ProblemData) -> float:
    """Energy whose negative gradient (in the evolving metric) drives the flow."""
    state.require_rho()
    gr = state.u.grid
    u = state.u.values
    rho = state.rho
    ux, uy = gr.gradient_values(u)
    dirichlet = 0.5 * gr.integrate_values(ux ** 2 + uy ** 2)
    bdry = gr.integrate_boundary_values(u[0])
    fa, jb = curvature_integrals(state, data)
    return (
        dirichlet
        + bdry
        - rho * np.log(fa)
        - 2.0 * (np.pi - rho) * np.log(jb)
        + 2.0 * (np.pi - rho) * np.log(2.0 * (np.pi - rho))
        + rho
        + rho * np.log(2.0 * rho)
    )


def denergy_drho(state: FlowState, data: ProblemData) -> float:
    """Partial derivative of the energy in rho; equals log(alpha / beta^2)."""
    alpha, beta = multipliers(state, data)
    return float(np.log(alpha) - 2.0 * np.log(beta))


def denergy_du(state: FlowState, data: ProblemData, direction: DiscField) -> float:
    """Directional derivative of the energy in u, by quadrature (no autodiff)."""
    state.require_rho()
    gr = state.u.grid
    u, phi = state.u.values, direction.values
    ux, uy = gr.gradient_values(u)
    px, py = gr.gradient_values(phi)
    alpha, beta = multipliers(state, data)
    return (
        gr.integrate_values(ux * px + uy * py)
        + gr.integrate_boundary_values(phi[0])
        - alpha * gr.integrate_values(data.f.values * np.exp(2.0 * u) * phi)
        - beta * gr.integrate_boundary_values(data.j.values * np.exp(u[0]) * phi[0])
    )


def mass(u: DiscField) -> float:
    """Conserved quantity m0 = (1/2) area + boundary length of g = e^{2u} g_flat."""
    gr = u.grid
    return 0.5 * gr.integrate_values(np.exp(2.0 * u.values)) + gr.integrate_boundary_values(
        np.exp(u.values[0])
    )


def gauss_bonnet_residual(u: DiscField) -> float:
    """int_B K dmu_g + int_dB k ds_g - 2 pi; identically zero in the continuum."""
    gr = u.grid
    kk = gauss_curvature(u)
    kb = geodesic_curvature(u)
    total = gr.integrate_values(kk.values * np.exp(2.0 * u.values)) + gr.integrate_boundary_values(
        kb.values * np.exp(u.values[0])
    )
    return float(total - 2.0 * np.pi)


def lebedev_milin_deficit(u: DiscField) -> float:
    """(1/4pi) int |grad u|^2 + avg_dB u - log avg_dB e^u; nonnegative."""
    gr = u.grid
    ux, uy = gr.gradient_values(u.values)
    dirichlet = gr.integrate_values(ux ** 2 + uy ** 2) / (4.0 * np.pi)
    avg_u = gr.integrate_boundary_values(u.values[0]) / (2.0 * np.pi)
    avg_eu = gr.integrate_boundary_values(np.exp(u.values[0])) / (2.0 * np.pi)
    return float(dirichlet + avg_u - np.log(avg_eu))


def problem_residual(u: DiscField, data: ProblemData) -> float:
    """L2 norms of the interior and boundary equation residuals.

    Zero exactly when u solves -Lap u = f e^{2u} with du/dnu + 1 = j e^u.
    """
    gr = u.grid
    interior = -gr.laplacian_values(u.values) - data.f.values * np.exp(2.0 * u.values)
    bdry = gr.normal_derivative_values(u.values) + 1.0 - data.j.values * np.exp(u.values[0])
    l2_int = np.sqrt(gr.integrate_values(interior ** 2))
    l2_bdry = np.sqrt(gr.integrate_boundary_values(bdry ** 2))
    return float(l2_int + l2_bdry)


def curvature_data(state: FlowState, data: ProblemData) -> CurvatureData:
    alpha, beta = multipliers(state, data)
    return CurvatureData(
        K=gauss_curvature(state.u),
        k=geodesic_curvature(state.u),
        alpha=alpha,
        beta=beta,
    )


def random_bandlimited(grid: DiscGrid, rng: np.random.Generator, amplitude: float = 0.12) -> DiscField:
    """Random smooth test field: disc harmonics with modes <= 6, degree <= 6.

    Coefficients are iid uniform, scaled so that e^{2u} stays within the
    quadrature accuracy of the default grid.
    """
    u = np.zeros((grid.n_r, grid.n_theta))
    for m in range(0, 7):
        for d in range(m, 7, 2):
            rad = grid.r[:, None] ** d
            u += rng.uniform(-amplitude, amplitude) * rad * np.cos(m * grid.theta)[None, :]
            if m > 0:
                u += rng.uniform(-amplitude, amplitude) * rad * np.sin(m * grid.theta)[None, :]
    return DiscField(grid, u)
