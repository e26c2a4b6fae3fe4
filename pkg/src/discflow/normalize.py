"""Moebius normalization: center the evolving metric on the lifted sphere.

For a conformal factor u, find the disc automorphism Phi_{a,0} whose
pullback v = u o Phi + (1/2) log det dPhi has vanishing lifted center of
mass: (1/2) int_B psi_R e^{2v} dz + int_dB psi_R e^v ds = 0.  The two real
components of a are solved by damped Newton with a finite-difference
Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conformal as cf
from . import model as md
from .errors import ConvergenceError
from .grid import DiscField
from .model import FlowState, ProblemData


@dataclass
class Normalization:
    """Result of the center-of-mass solve (theta = 0 convention)."""

    phi: cf.MobiusMap
    v: DiscField
    residual: np.ndarray
    R_used: float
    iterations: int = 0


def center_of_mass_residual(v: DiscField, R: float) -> np.ndarray:
    """(1/2) int_B psi_R e^{2v} dz + int_dB psi_R e^v ds as a 2-vector."""
    grid = v.grid
    psi = cf.stereographic(R, grid.z)           # (n_r, n_theta, 2)
    w_int = 0.5 * grid.w_area * np.exp(2.0 * v.values)
    w_bdy = grid.w_theta * np.exp(v.values[0])
    psi_b = cf.stereographic(R, np.exp(1j * grid.theta))
    out = np.tensordot(w_int, psi, axes=((0, 1), (0, 1)))
    out += w_bdy @ psi_b
    return out


def _residual_at(u: DiscField, R: float, a: complex) -> tuple[np.ndarray, DiscField]:
    v = cf.pullback_conformal_factor(u, cf.MobiusMap(a, 0.0))
    return center_of_mass_residual(v, R), v


def mass_centroid(u: DiscField) -> complex:
    """Euclidean center of mass of the metric; cheap Newton starting guess."""
    grid = u.grid
    w_int = 0.5 * grid.w_area * np.exp(2.0 * u.values)
    w_bdy = grid.w_theta * np.exp(u.values[0])
    zb = np.exp(1j * grid.theta)
    total = np.sum(w_int) + np.sum(w_bdy)
    return complex((np.sum(w_int * grid.z) + np.sum(w_bdy * zb)) / total)


def normalize(
    u: DiscField,
    R: float,
    guess: cf.MobiusMap | None = None,
    tol: float = 1e-9,
    max_iter: int = 50,
) -> Normalization:
    """Solve the center-of-mass condition over a in the open disc.

    Cold starts use the metric's Euclidean mass centroid; a handful of
    fallback starts are tried before giving up.  Raises ConvergenceError
    (carrying the best iterate) on stagnation; an a drifting onto the unit
    circle is projected back with a margin.
    """
    starts: list[complex] = []
    if guess is not None:
        starts.append(complex(guess.a))
    centroid = mass_centroid(u)
    if abs(centroid) > 0.999:
        centroid *= 0.999 / abs(centroid)
    starts += [centroid, 0.5 * centroid, 0.0 + 0.0j]
    last_error: ConvergenceError | None = None
    for start in starts:
        try:
            return _normalize_from(u, R, start, tol, max_iter)
        except ConvergenceError as exc:
            last_error = exc
    raise last_error


def _normalize_from(
    u: DiscField,
    R: float,
    start: complex,
    tol: float,
    max_iter: int,
) -> Normalization:
    a = complex(start)
    res, v = _residual_at(u, R, a)
    best = Normalization(cf.MobiusMap(a, 0.0), v, res, R, 0)
    fd_step = 1e-7
    r_max = 1.0 - 1e-5                 # keep a (and its FD stencil) inside the disc

    for it in range(1, max_iter + 1):
        nrm = float(np.hypot(*res))
        if nrm < tol:
            return Normalization(cf.MobiusMap(a, 0.0), v, res, R, it - 1)

        jac = np.empty((2, 2))
        for col, dz in enumerate((fd_step, 1j * fd_step)):
            rp, _ = _residual_at(u, R, a + dz)
            rm, _ = _residual_at(u, R, a - dz)
            jac[:, col] = (rp - rm) / (2.0 * fd_step)
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular normalization Jacobian", best)

        step = complex(delta[0], delta[1])
        accepted = False
        for _ in range(20):
            cand = a + step
            if abs(cand) >= r_max:
                cand = cand / abs(cand) * r_max
            res_new, v_new = _residual_at(u, R, cand)
            if np.hypot(*res_new) < nrm:
                a, res, v = cand, res_new, v_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise ConvergenceError(
                f"normalization stalled at |residual| = {nrm:.3e}", best
            )
        if np.hypot(*res) < np.hypot(*best.residual):
            best = Normalization(cf.MobiusMap(a, 0.0), v, res, R, it)

    nrm = float(np.hypot(*res))
    if nrm < tol:
        return Normalization(cf.MobiusMap(a, 0.0), v, res, R, max_iter)
    raise ConvergenceError(f"normalization did not reach tol, |res| = {nrm:.3e}", best)


def drift_speed_bound(state: FlowState, data: ProblemData, normalization=None) -> float:
    """(int_B u_t^2 dmu_g + int_dB u_t^2 ds_g)^{1/2}, bounding the map velocity.

    The normalization argument is accepted for interface symmetry; the bound
    itself only involves the un-normalized rates.
    """
    cd = md.curvature_data(state, data)
    grid = state.u.grid
    interior = cd.alpha * data.f.values - cd.K.values
    bdry = cd.beta * data.j.values - cd.k.values
    return float(
        np.sqrt(
            grid.integrate_values(interior ** 2 * np.exp(2.0 * state.u.values))
            + grid.integrate_boundary_values(bdry ** 2 * np.exp(state.u.values[0]))
        )
    )
