"""Spherical-cap reference geometry pulled back to the disc.

The cap of parameter R is the image of the disc under scaled inverse
stereographic projection; the round metric pulls back to the conformal
factor e^{w_R} = 2R/(1 + R^2 |z|^2).  This module provides the exact cap
conformal factors, the Steklov eigenproblem of the cap discretized on the
disc grid, the compensated tangent fields generating the cap's conformal
group, and the Kazdan-Warner integral obstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import conformal as cf
from .errors import DomainError, ShapeError
from .grid import DiscField, DiscGrid


def cap_profile(R: float, scale: float, grid: DiscGrid) -> DiscField:
    """Conformal factor log(2R / sqrt(scale) / (1 + R^2 |z|^2)) of the cap.

    With scale = 1 the metric has Gauss curvature 1 and boundary geodesic
    curvature k_R; scale s multiplies K by s and k by sqrt(s).
    """
    if not 0.0 < R <= 1.0:
        raise DomainError("R must lie in (0, 1]")
    if scale <= 0.0:
        raise DomainError("scale must be positive")
    rho2 = grid.x ** 2 + grid.y ** 2
    return DiscField(grid, np.log(2.0 * R / np.sqrt(scale) / (1.0 + R ** 2 * rho2)))


def cap_equilibrium_rho(R: float) -> float:
    """Interior curvature share 2 pi R^2/(1+R^2) of the cap rest point."""
    return 2.0 * np.pi * R ** 2 / (1.0 + R ** 2)


@dataclass
class CapMeasures:
    """Quadrature weights of the spectral measures of the cap analysis.

    mu_hat: interior weight 2 e^{2 w_R} against area quadrature plus
    boundary weight k_R e^{w_R} against arc quadrature.  mu_R: the metric
    measure of a conformal factor v (area e^{2v}, boundary e^{v}).
    """

    grid: DiscGrid
    mu_hat_interior: np.ndarray
    mu_hat_boundary: np.ndarray
    mu_R_interior: np.ndarray | None = None
    mu_R_boundary: np.ndarray | None = None

    @staticmethod
    def for_cap(R: float, grid: DiscGrid, v: DiscField | None = None) -> "CapMeasures":
        geom = cf.CapGeometry(R)
        e_wr = 2.0 * R / (1.0 + R ** 2 * (grid.x ** 2 + grid.y ** 2))
        mu_hat_i = 2.0 * grid.w_area * e_wr ** 2
        mu_hat_b = geom.k_R * grid.w_theta * e_wr[0]
        mu_r_i = mu_r_b = None
        if v is not None:
            mu_r_i = grid.w_area * np.exp(2.0 * v.values)
            mu_r_b = grid.w_theta * np.exp(v.values[0])
        return CapMeasures(grid, mu_hat_i, mu_hat_b, mu_r_i, mu_r_b)

    def mu_hat_mass(self) -> float:
        return float(np.sum(self.mu_hat_interior) + np.sum(self.mu_hat_boundary))

    def mu_hat_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(
            np.sum(self.mu_hat_interior * a * b) + np.sum(self.mu_hat_boundary * a[0] * b[0])
        )

    def mu_R_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        if self.mu_R_interior is None:
            raise ValueError("mu_R weights were not attached")
        return float(
            np.sum(self.mu_R_interior * a * b) + np.sum(self.mu_R_boundary * a[0] * b[0])
        )


@dataclass
class SteklovSpectrum:
    """Lowest Steklov eigenpairs of the cap, mu_hat-orthonormal."""

    R: float
    eigenvalues: np.ndarray
    eigenfunctions: list[DiscField]
    measures: CapMeasures


def _stiffness_matrix(grid: DiscGrid) -> np.ndarray:
    """Dense flat Dirichlet form int grad(u) . grad(v) dz on flattened fields."""
    key = "stiffness"
    if key not in grid._dense_ops:
        gx = grid.dense_operator("dx")
        gy = grid.dense_operator("dy")
        w = grid.w_area.ravel()
        k = gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy)
        grid._dense_ops[key] = 0.5 * (k + k.T)
        del gx, gy
    return grid._dense_ops[key]


def steklov_spectrum(R: float, n_eigs: int, grid: DiscGrid) -> SteklovSpectrum:
    """Solve the pulled-back Steklov eigenproblem of the cap on the disc grid.

    On the disc the problem reads -Lap phi = 2 lambda e^{2 w_R} phi with
    boundary condition d(phi)/dnu = lambda sigma phi.  The cap weight is
    radial, so the weak form block-diagonalizes over Fourier modes; each
    mode yields a dense symmetric radial eigenproblem (stiffness against
    the mu_hat mass weights) and the lowest pairs are merged across modes,
    mu_hat-orthonormalized.
    """
    if not 0.0 < R < 1.0:
        raise DomainError("Steklov spectrum needs 0 < R < 1")
    n_dof = grid.n_r * grid.n_theta
    if n_eigs > n_dof:
        raise ShapeError(f"n_eigs = {n_eigs} exceeds grid dimension {n_dof}")

    geom = cf.CapGeometry(R)
    n_r = grid.n_r
    w_r = grid.w_r
    e2w_rad = (2.0 * R / (1.0 + R ** 2 * grid.r ** 2)) ** 2
    m_rad = 2.0 * w_r * e2w_rad

    candidates: list[tuple[float, int, np.ndarray]] = []
    max_mode = min(grid.n_theta // 2, n_eigs + 2)
    for m in range(0, max_mode + 1):
        d1m = grid._mode_dr(m)
        k_m = d1m.T @ (w_r[:, None] * d1m) + (m ** 2) * np.diag(w_r / grid.r ** 2)
        k_m = 0.5 * (k_m + k_m.T)
        mass = m_rad.copy()
        mass[0] += geom.sigma * 1.0
        scale = 1.0 / np.sqrt(mass)
        ks = k_m * scale[:, None] * scale[None, :]
        vals, vecs = np.linalg.eigh(0.5 * (ks + ks.T))
        take = min(n_eigs, n_r)
        for i in range(take):
            candidates.append((float(vals[i]), m, vecs[:, i] * scale))
    candidates.sort(key=lambda item: (item[0], item[1]))

    fields: list[DiscField] = []
    eigenvalues: list[float] = []
    measures = CapMeasures.for_cap(R, grid)
    for lam, m, radial in candidates:
        if len(fields) >= n_eigs:
            break
        if m == 0 or m == grid.n_theta // 2:
            # single real mode (constant or sawtooth direction)
            norm = np.sqrt(2.0 * np.pi)
            trig = np.cos(m * grid.theta)
            fields.append(DiscField(grid, radial[:, None] / norm * trig[None, :]))
            eigenvalues.append(lam)
        else:
            norm = np.sqrt(np.pi)
            for trig in (np.cos(m * grid.theta), np.sin(m * grid.theta)):
                if len(fields) >= n_eigs:
                    break
                fields.append(DiscField(grid, radial[:, None] / norm * trig[None, :]))
                eigenvalues.append(lam)
    return SteklovSpectrum(R, np.array(eigenvalues), fields, measures)


def steklov_spectrum_dense(R: float, n_eigs: int, grid: DiscGrid) -> SteklovSpectrum:
    """Full-grid dense variant of the Steklov solve (cross-validation path).

    Carries an angular aliasing error a few orders above the per-mode
    solve; kept for validating the block-diagonalized assembly.
    """
    if not 0.0 < R < 1.0:
        raise DomainError("Steklov spectrum needs 0 < R < 1")
    n_dof = grid.n_r * grid.n_theta
    if n_eigs > n_dof:
        raise ShapeError(f"n_eigs = {n_eigs} exceeds grid dimension {n_dof}")

    stiffness = _stiffness_matrix(grid)
    measures = CapMeasures.for_cap(R, grid)
    m_diag = measures.mu_hat_interior.ravel().copy()
    m_diag[: grid.n_theta] += measures.mu_hat_boundary
    scale = 1.0 / np.sqrt(m_diag)
    k_scaled = stiffness * scale[:, None] * scale[None, :]
    k_scaled = 0.5 * (k_scaled + k_scaled.T)

    # The equispaced first-derivative matrix annihilates the angular Nyquist
    # mode, so fields f(r) (-1)^k carry spuriously low Dirichlet energy.
    # Lift that whole subspace clear of the physical spectrum.
    nt = grid.n_theta
    saw = (-1.0) ** np.arange(nt)
    penalty = 1e4
    for i in range(grid.n_r):
        idx = slice(i * nt, (i + 1) * nt)
        b = saw * np.sqrt(m_diag[idx])
        b /= np.linalg.norm(b)
        k_scaled[idx, idx] += penalty * np.outer(b, b)

    vals, vecs = scipy.linalg.eigh(k_scaled, subset_by_index=[0, n_eigs - 1])
    fields = []
    for i in range(n_eigs):
        phi = (vecs[:, i] * scale).reshape(grid.n_r, grid.n_theta)
        fields.append(DiscField(grid, phi))
    return SteklovSpectrum(R, vals, fields, measures)


@dataclass
class LiftedTangentFields:
    """Compensated conformal fields xi_1 = grad X_1 + sigma X ^ e_2 (and xi_2).

    xi3d holds the ambient components on the lifted grid points; xi_disc
    the coordinate representation (d Psi_R)^{-1} xi used to evaluate
    directional derivatives of scalars sampled on the disc.
    """

    R: float
    grid: DiscGrid
    xi3d: np.ndarray          # (2, n_r, n_theta, 3)
    xi_disc: np.ndarray       # (2, n_r, n_theta, 2)
    X: np.ndarray             # (n_r, n_theta, 3) lifted points

    def boundary_normal_components(self) -> np.ndarray:
        """xi_i . nu on the boundary circle of the cap; zero for tangent fields."""
        geom = cf.CapGeometry(self.R)
        ct, st = np.cos(self.grid.theta), np.sin(self.grid.theta)
        nu = np.stack([geom.sigma * ct, geom.sigma * st, -geom.r * np.ones_like(ct)], axis=-1)
        return np.einsum("ikd,kd->ik", self.xi3d[:, 0, :, :], nu)

    def boundary_tangential_components(self) -> np.ndarray:
        """xi_i . tau along the boundary circle."""
        ct, st = np.cos(self.grid.theta), np.sin(self.grid.theta)
        tau = np.stack([-st, ct, np.zeros_like(ct)], axis=-1)
        return np.einsum("ikd,kd->ik", self.xi3d[:, 0, :, :], tau)

    def spherical_divergence(self, i: int) -> np.ndarray:
        """div_{S^2} xi_i computed from the pushed-down representation."""
        grid = self.grid
        e2w = (2.0 * self.R / (1.0 + self.R ** 2 * (grid.x ** 2 + grid.y ** 2))) ** 2
        vx = e2w * self.xi_disc[i, :, :, 0]
        vy = e2w * self.xi_disc[i, :, :, 1]
        div_flat = grid.gradient_values(vx)[0] + grid.gradient_values(vy)[1]
        return div_flat / e2w


def _psi_jacobian(R: float, grid: DiscGrid) -> np.ndarray:
    """Jacobian of the lift Psi_R as a (n_r, n_theta, 3, 2) array."""
    x, y = grid.x, grid.y
    d = 1.0 + R ** 2 * (x ** 2 + y ** 2)
    j = np.empty(x.shape + (3, 2))
    j[..., 0, 0] = 2.0 * R * (d - 2.0 * R ** 2 * x ** 2) / d ** 2
    j[..., 0, 1] = -4.0 * R ** 3 * x * y / d ** 2
    j[..., 1, 0] = j[..., 0, 1]
    j[..., 1, 1] = 2.0 * R * (d - 2.0 * R ** 2 * y ** 2) / d ** 2
    j[..., 2, 0] = -4.0 * R ** 2 * x / d ** 2
    j[..., 2, 1] = -4.0 * R ** 2 * y / d ** 2
    return j


def lifted_tangent_fields(R: float, grid: DiscGrid) -> LiftedTangentFields:
    """Fields xi_1 = grad X_1 + sigma X ^ e_2, xi_2 = grad X_2 - sigma X ^ e_1."""
    if not 0.0 < R <= 1.0:
        raise DomainError("R must lie in (0, 1]")
    geom = cf.CapGeometry(R)
    big_x = cf.stereographic_lift(R, grid.z)       # (n_r, n_theta, 3)
    x1, x2, x3 = big_x[..., 0], big_x[..., 1], big_x[..., 2]

    grad_x1 = np.stack([1.0 - x1 * x1, -x1 * x2, -x1 * x3], axis=-1)
    grad_x2 = np.stack([-x2 * x1, 1.0 - x2 * x2, -x2 * x3], axis=-1)
    cross_e2 = np.stack([-x3, np.zeros_like(x3), x1], axis=-1)       # X ^ e_2
    cross_e1 = np.stack([np.zeros_like(x3), x3, -x2], axis=-1)       # X ^ e_1
    xi3d = np.stack([grad_x1 + geom.sigma * cross_e2,
                     grad_x2 - geom.sigma * cross_e1], axis=0)

    jac = _psi_jacobian(R, grid)
    e2w = (2.0 * R / (1.0 + R ** 2 * (grid.x ** 2 + grid.y ** 2))) ** 2
    xi_disc = np.einsum("krtdc,krtd->krtc", np.broadcast_to(jac, (2,) + jac.shape), xi3d)
    xi_disc = xi_disc / e2w[None, :, :, None]
    return LiftedTangentFields(R, grid, xi3d, xi_disc, big_x)


def cap_curvatures(u_cap: DiscField, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Curvatures of g = e^{2u} g_{S^2} on the cap, sampled on the disc.

    K = e^{-2u} (-Lap_{S^2} u + 1) and k = e^{-u} (du/dnu_{S^2} + k_R).
    """
    grid = u_cap.grid
    geom = cf.CapGeometry(R)
    e2w = (2.0 * R / (1.0 + R ** 2 * (grid.x ** 2 + grid.y ** 2))) ** 2
    lap_sphere = grid.laplacian_values(u_cap.values) / e2w
    big_k = np.exp(-2.0 * u_cap.values) * (-lap_sphere + 1.0)
    dn = grid.normal_derivative_values(u_cap.values) / geom.r
    small_k = np.exp(-u_cap.values[0]) * (dn + geom.k_R)
    return big_k, small_k


def kazdan_warner_residual(u_cap: DiscField, R: float,
                           fields: LiftedTangentFields | None = None) -> np.ndarray:
    """(1/2) int dK . xi_i dmu_g + int dk . xi_i ds_g for i = 1, 2.

    Vanishes for every conformal factor over the cap; the directional
    derivative of the scalar curvature is metric-independent and is taken
    along the pushed-down coordinate representation of xi_i.
    """
    grid = u_cap.grid
    geom = cf.CapGeometry(R)
    if fields is None:
        fields = lifted_tangent_fields(R, grid)
    big_k, small_k = cap_curvatures(u_cap, R)
    e2w = (2.0 * R / (1.0 + R ** 2 * (grid.x ** 2 + grid.y ** 2))) ** 2

    kx, ky = grid.gradient_values(big_k)
    area_weight = grid.w_area * np.exp(2.0 * u_cap.values) * e2w
    dk_dtau = grid.dtheta(small_k) / geom.r
    tangential = fields.boundary_tangential_components()
    bdry_weight = grid.w_theta * np.exp(u_cap.values[0]) * geom.r

    out = np.empty(2)
    for i in range(2):
        interior = kx * fields.xi_disc[i, :, :, 0] + ky * fields.xi_disc[i, :, :, 1]
        out[i] = 0.5 * np.sum(area_weight * interior) + np.sum(
            bdry_weight * dk_dtau * tangential[i]
        )
    return out
