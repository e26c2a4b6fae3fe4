"""Per-snapshot scalar monitors and the convergence/concentration classifier."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

from . import model as md
from .model import FlowState, ProblemData


@dataclass
class DiagnosticsRecord:
    """One row of flow diagnostics; field order defines the CSV schema."""

    t: float
    E: float
    m0: float
    rho: float
    alpha: float
    beta: float
    F: float
    G: float
    gauss_bonnet_residual: float
    min_K_minus_alpha_f: float
    compat_defect: float
    a_re: float = float("nan")
    a_im: float = float("nan")
    epsilon: float = float("nan")
    classifier: str = ""


CSV_COLUMNS = [f.name for f in fields(DiagnosticsRecord)]


def deviation_F(state: FlowState, data: ProblemData) -> float:
    """F = int |alpha f - K|^2 dmu_g + int |beta j - k|^2 ds_g + rho_t^2."""
    cd = md.curvature_data(state, data)
    u = state.u.values
    grid = state.u.grid
    interior = cd.alpha * data.f.values - cd.K.values
    bdry = cd.beta * data.j.values - cd.k.values
    rho_t = np.log(cd.beta ** 2 / cd.alpha)
    return float(
        grid.integrate_values(interior ** 2 * np.exp(2.0 * u))
        + grid.integrate_boundary_values(bdry ** 2 * np.exp(u[0]))
        + rho_t ** 2
    )


def deviation_G(state: FlowState, data: ProblemData) -> float:
    """G = int_B |grad(K - alpha f)|^2 dz (flat Dirichlet energy)."""
    cd = md.curvature_data(state, data)
    w = cd.K.values - cd.alpha * data.f.values
    gx, gy = state.u.grid.gradient_values(w)
    return float(state.u.grid.integrate_values(gx ** 2 + gy ** 2))


def curvature_floor_monitor(state: FlowState, data: ProblemData) -> float:
    """min over B of (K - alpha f); stays above a negative kappa along runs."""
    cd = md.curvature_data(state, data)
    return float(np.min(cd.K.values - cd.alpha * data.f.values))


def curvature_floor_kappa(state: FlowState, data: ProblemData, m0: float | None = None) -> float:
    """Default floor from the a-priori estimate, evaluated with measured values.

    Uses the larger (more negative) of the two admissibility conditions: the
    curvature-size bound and the quadratic condition kappa^2 + 2 m0 C kappa - C > 0.
    """
    cd = md.curvature_data(state, data)
    if m0 is None:
        m0 = md.mass(state.u)
    f_max = float(np.max(data.f.values))
    j_max = float(np.max(data.j.values))
    rho = state.rho
    rho_t = abs(np.log(cd.beta ** 2 / cd.alpha))
    c1 = max(cd.alpha * rho_t / rho * f_max, cd.alpha ** 2 / rho * f_max ** 2)
    c2 = max(
        2.0 * cd.beta * rho_t / (np.pi - rho) * j_max,
        cd.beta ** 2 / (np.pi - rho) * j_max ** 2,
    )
    kappa_size = -2.0 * (cd.alpha * f_max + cd.beta * j_max)
    roots = [-m0 * c - np.sqrt(m0 ** 2 * c ** 2 + c) for c in (c1, c2)]
    return 1.05 * min([kappa_size] + roots)


def compat_defect(state: FlowState, data: ProblemData) -> float:
    """Max boundary gap between the interior rate alpha f - K and beta j - k."""
    cd = md.curvature_data(state, data)
    interior_rate = cd.alpha * data.f.values[0] - cd.K.values[0]
    bdry_rate = cd.beta * data.j.values - cd.k.values
    return float(np.max(np.abs(interior_rate - bdry_rate)))


def record(state: FlowState, data: ProblemData) -> DiagnosticsRecord:
    cd = md.curvature_data(state, data)
    return DiagnosticsRecord(
        t=state.t,
        E=md.energy(state, data),
        m0=md.mass(state.u),
        rho=state.rho,
        alpha=cd.alpha,
        beta=cd.beta,
        F=deviation_F(state, data),
        G=deviation_G(state, data),
        gauss_bonnet_residual=md.gauss_bonnet_residual(state.u),
        min_K_minus_alpha_f=float(np.min(cd.K.values - cd.alpha * data.f.values)),
        compat_defect=compat_defect(state, data),
    )


def boundary_mass_fraction(state: FlowState, z0: complex, radius: float) -> float:
    """Fraction of m0 carried by the metric inside a disc around z0."""
    grid = state.u.grid
    mask = np.abs(grid.z - z0) < radius
    local = 0.5 * np.sum(grid.w_area * np.exp(2.0 * state.u.values) * mask)
    bmask = np.abs(np.exp(1j * grid.theta) - z0) < radius
    local += np.sum(grid.w_theta * np.exp(state.u.values[0]) * bmask)
    return float(local / md.mass(state.u))


def classify(
    records: list[DiagnosticsRecord],
    steady_tol: float = 1e-6,
    concentration_F: float = 1e-2,
    mass_fraction: float = 0.9,
    state: FlowState | None = None,
) -> str:
    """Dichotomy classifier over a trajectory tail.

    converged     : F below steady_tol with the tracked center not escaping
    concentrating : F small, epsilon halved over the tail, and most of the
                    mass inside a boundary neighborhood of the target
    undecided     : anything else (including too-short tails)
    """
    if len(records) < 10:
        return "undecided"
    tail = records[-10:]
    f_last = tail[-1].F
    eps = np.array([r.epsilon for r in tail])
    have_eps = np.all(np.isfinite(eps))

    if f_last < steady_tol:
        if not have_eps or eps[-1] >= 0.5 * eps[0]:
            return "converged"
    if f_last < concentration_F and have_eps and eps[-1] <= 0.5 * eps[0]:
        if state is not None:
            a = complex(tail[-1].a_re, tail[-1].a_im)
            if abs(a) > 0:
                z0 = a / abs(a)
                frac = boundary_mass_fraction(state, z0, max(10.0 * eps[-1], 0.2))
                if frac > mass_fraction:
                    return "concentrating"
        else:
            return "concentrating"
    return "undecided"


def records_to_csv(records: list[DiagnosticsRecord]) -> str:
    """Serialize records with 17 significant digits, schema-ordered."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        row = []
        for name in CSV_COLUMNS:
            val = getattr(r, name)
            row.append(f"{val:.17g}" if isinstance(val, float) else str(val))
        writer.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> list[DiagnosticsRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ValueError("unexpected diagnostics CSV schema")
    out = []
    for row in reader:
        vals = [float(x) for x in row[:-1]] + [row[-1]]
        out.append(DiagnosticsRecord(*vals))
    return out
