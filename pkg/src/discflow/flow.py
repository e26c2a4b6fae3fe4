"""Time integration of the coupled curvature flow.

Interior nodes follow du/dt = alpha f - K, boundary nodes carry their own
rate du/dt = beta j - k (the dynamic boundary condition replaces the
interior formula at r = 1), and rho follows d(rho)/dt = log(beta^2/alpha).

Two schemes are provided.  The explicit classical Runge-Kutta scheme is
restricted by the Chebyshev stability limit and serves consistency checks
and small grids.  The production scheme is a stabilized backward-Euler
step: the Laplacian is treated implicitly with the frozen scalar
coefficient max(e^{-2u}), which keeps the implicit operator separable into
Fourier modes, while the remaining (non-positive) diffusion defect and the
curvature sources are explicit.  The boundary rows discretize the dynamic
boundary condition implicitly through a Robin row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import conformal as cf
from . import diagnostics as dg
from . import model as md
from .errors import BlowUpError, ConfigError, MonitorViolation, PreconditionError
from .grid import DiscField, DiscGrid
from .model import FlowState, ProblemData


@dataclass
class FlowConfig:
    dt_init: float = 1e-3
    dt_max: float = 1e-2
    cfl_safety: float = 0.5
    t_end: float = 10.0
    scheme: str = "semi_implicit"          # semi_implicit | explicit_rk4
    steady_tol: float = 1e-6
    record_every: int = 10
    record_fields: bool = False
    max_steps: int = 2_000_000
    dt_floor: float = 1e-10
    blowup_margin: float = 5.0

    def __post_init__(self):
        if self.dt_init <= 0 or self.dt_max <= 0 or self.t_end <= 0:
            raise ConfigError("time steps and horizon must be positive")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ConfigError("cfl_safety must lie in (0, 1)")
        if self.scheme not in ("semi_implicit", "explicit_rk4"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    records: list[dg.DiagnosticsRecord] = field(default_factory=list)
    snapshots: list[FlowState] = field(default_factory=list)
    final: FlowState | None = None
    status: str = "running"                # steady | t_end | blowup | monitor

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def rhs(state: FlowState, data: ProblemData) -> tuple[DiscField, float]:
    """Flow rates: interior alpha f - K, boundary row beta j - k, and rho_t."""
    state.require_rho()
    cd = md.curvature_data(state, data)
    rates = cd.alpha * data.f.values - cd.K.values
    rates[0] = cd.beta * data.j.values - cd.k.values
    drho = float(np.log(cd.beta ** 2 / cd.alpha))
    return DiscField(state.u.grid, rates), drho


def _min_spacing(grid: DiscGrid) -> float:
    radial = np.min(-np.diff(grid.r))
    angular = grid.r[-1] * 2.0 * np.pi / grid.n_theta
    return float(min(radial, angular))


def explicit_dt(state: FlowState, config: FlowConfig) -> float:
    h_min = _min_spacing(state.u.grid)
    return min(config.dt_max, config.cfl_safety * float(np.min(np.exp(2.0 * state.u.values))) * h_min ** 2)


def _check_state(u_new: np.ndarray, rho_new: float, state: FlowState, config: FlowConfig):
    if not np.all(np.isfinite(u_new)) or not np.isfinite(rho_new):
        raise BlowUpError("non-finite state after step", last_state=state)
    if not 0.0 < rho_new < np.pi:
        raise MonitorViolation(f"rho = {rho_new} left (0, pi)", last_state=state)


def step_explicit_rk4(state: FlowState, data: ProblemData, config: FlowConfig,
                      dt: float | None = None) -> FlowState:
    """Classical four-stage Runge-Kutta on the combined (u, rho) state."""
    grid = state.u.grid
    if dt is None:
        dt = explicit_dt(state, config)
    if dt < config.dt_floor:
        raise BlowUpError("time step underflow (CFL collapse)", last_state=state)

    def f(u_vals: np.ndarray, rho: float):
        du, drho = rhs(FlowState(DiscField(grid, u_vals), rho, state.t), data)
        return du.values, drho

    u0, r0 = state.u.values, state.rho
    k1u, k1r = f(u0, r0)
    k2u, k2r = f(u0 + 0.5 * dt * k1u, r0 + 0.5 * dt * k1r)
    k3u, k3r = f(u0 + 0.5 * dt * k2u, r0 + 0.5 * dt * k2r)
    k4u, k4r = f(u0 + dt * k3u, r0 + dt * k3r)
    u_new = u0 + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    rho_new = r0 + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    _check_state(u_new, rho_new, state, config)
    return FlowState(DiscField(grid, u_new), float(rho_new), state.t + dt)


class SemiImplicitWorkspace:
    """Holds the frozen stabilization coefficient and its factorization.

    The implicit coefficient must dominate e^{-2u} pointwise for the
    max-coefficient stabilization to be unconditionally stable, so the
    factorization is refreshed with 10% headroom whenever the field outruns
    the frozen value (or it has shrunk by more than half).
    """

    def __init__(self):
        self.nu_bar: float | None = None
        self.dt: float | None = None
        self.factorization = None

    def get(self, grid, dt: float, nu_needed: float):
        stale = (
            self.factorization is None
            or self.dt != dt
            or nu_needed > self.nu_bar
            or nu_needed < 0.5 * self.nu_bar
        )
        if stale:
            self.nu_bar = 1.1 * nu_needed
            self.dt = dt
            self.factorization = grid.helmholtz_factor(1.0 / (dt * self.nu_bar))
        return self.nu_bar, self.factorization


def step_semi_implicit(state: FlowState, data: ProblemData, config: FlowConfig,
                       dt: float | None = None,
                       workspace: SemiImplicitWorkspace | None = None) -> FlowState:
    """Stabilized backward-Euler step; rho is advanced explicitly."""
    grid = state.u.grid
    if dt is None:
        dt = config.dt_max
    if workspace is None:
        workspace = SemiImplicitWorkspace()
    u = state.u.values
    state.require_rho()

    lap_u = grid.laplacian_values(u)
    diff_coeff = np.exp(-2.0 * u)
    e2u = np.exp(2.0 * u)
    eu_b = np.exp(u[0])
    alpha = 2.0 * state.rho / grid.integrate_values(data.f.values * e2u)
    beta = 2.0 * (np.pi - state.rho) / grid.integrate_boundary_values(data.j.values * eu_b)

    nu_needed = float(np.max(diff_coeff))
    if dt * nu_needed < config.dt_floor:
        raise BlowUpError("implicit coefficient underflow", last_state=state)
    nu_bar, fact = workspace.get(grid, dt, nu_needed)

    c = fact.c
    explicit_part = alpha * data.f.values + (diff_coeff - nu_bar) * lap_u
    helm_rhs = c * (u + dt * explicit_part)

    b = 1.0 / eu_b
    bdata = u[0] + dt * (beta * data.j.values - b)
    u_new = fact.solve(helm_rhs, 1.0, dt * b, bdata)

    rho_new = state.rho + dt * 2.0 * (np.log(beta) - 0.5 * np.log(alpha))
    _check_state(u_new, rho_new, state, config)
    return FlowState(DiscField(grid, u_new), float(rho_new), state.t + dt)


def step(state: FlowState, data: ProblemData, config: FlowConfig,
         dt: float | None = None,
         workspace: SemiImplicitWorkspace | None = None) -> FlowState:
    if config.scheme == "explicit_rk4":
        return step_explicit_rk4(state, data, config, dt)
    return step_semi_implicit(state, data, config, dt, workspace)


def run(initial: FlowState, data: ProblemData, config: FlowConfig) -> Trajectory:
    """Integrate until t_end, steadiness, or failure; record diagnostics."""
    traj = Trajectory()
    state = initial.copy()
    sup_u0 = float(np.max(state.u.values))
    f_max = float(np.max(data.f.values))
    j_max = float(np.max(data.j.values))

    def record_now(st: FlowState):
        traj.records.append(dg.record(st, data))
        if config.record_fields:
            traj.snapshots.append(st.copy())

    record_now(state)
    n = 0
    workspace = SemiImplicitWorkspace()
    try:
        while state.t < config.t_end - 1e-14 and n < config.max_steps:
            dt = None
            if config.scheme == "semi_implicit":
                dt = min(config.dt_max, config.t_end - state.t)
            state = step(state, data, config, dt, workspace)
            n += 1

            cd_alpha = traj.records[-1].alpha
            cd_beta = traj.records[-1].beta
            u1 = sup_u0 + state.t * (cd_alpha * f_max + cd_beta * j_max)
            if float(np.max(state.u.values)) > u1 + config.blowup_margin:
                raise BlowUpError("state exceeded the a-priori sup bound", last_state=state)

            if n % config.record_every == 0:
                record_now(state)
                if traj.records[-1].F < config.steady_tol:
                    traj.status = "steady"
                    break
        else:
            traj.status = "t_end"
        if traj.status == "running":
            traj.status = "t_end"
    except (BlowUpError, MonitorViolation) as exc:
        traj.status = "blowup" if isinstance(exc, BlowUpError) else "monitor"
        traj.final = exc.last_state
        exc.trajectory = traj
        raise
    if traj.records[-1].t < state.t:
        record_now(state)
    traj.final = state
    return traj


def extract_solution(state: FlowState, data: ProblemData, steady_tol: float = 1e-6
                     ) -> tuple[DiscField, float]:
    """Rescale a rest point to a solution u + log(beta) of the curvature problem."""
    f_val = dg.deviation_F(state, data)
    if f_val >= steady_tol:
        raise PreconditionError(
            f"extract_solution called with F = {f_val:.3e} >= {steady_tol}"
        )
    _, beta = md.multipliers(state, data)
    tilde_u = DiscField(state.u.grid, state.u.values + np.log(beta))
    return tilde_u, md.problem_residual(tilde_u, data)


def concentrated_initial_data(a: complex, data: ProblemData) -> FlowState:
    """Cap-shaped initial data centered at a, tuned so alpha = beta^2.

    The shape is the pullback of the round-cap conformal factor at the
    scaling radius of the projected target a/|a| by the Moebius map moving
    a to the origin; rho solves the scalar compatibility condition, and the
    additive constant matches the concentration-limit normalization.
    """
    a = complex(a)
    if abs(a) >= 1.0:
        raise ConfigError("concentration parameter must satisfy |a| < 1")
    grid = data.grid

    if a == 0:
        target = 0.0 + 0.0j
        f_target = float(data.f_at(np.array([0.0 + 0.0j]))[0])
        j_target = float(grid.interpolate(data.j_harm.values, np.array([0.0 + 0.0j]))[0])
    else:
        target = a / abs(a)
        f_target = float(data.f_at(np.array([target]))[0])
        j_target = float(data.j_at_angle(np.array([np.angle(target)]))[0])
    radius = cf.scaling_radius(f_target, j_target)

    # shape: closed-form pullback of the cap factor by Phi_{-a, 0}
    phi_back = cf.MobiusMap(-a, 0.0)
    mapped = cf.apply(phi_back, grid.z)
    cap_vals = np.log(2.0 * radius / (1.0 + (radius * np.abs(mapped)) ** 2))
    shape = cap_vals + cf.log_deriv_modulus(phi_back, grid.z)

    # scalar integrals by conformal invariance (smooth integrands)
    phi_fwd = cf.MobiusMap(a, 0.0)
    fwd = cf.apply(phi_fwd, grid.z)
    e_wr = 2.0 * radius / (1.0 + (radius * np.abs(grid.z)) ** 2)
    f_int = grid.integrate_values(data.f_at(fwd) * e_wr ** 2)
    bdry_angles = np.angle(cf.apply(phi_fwd, np.exp(1j * grid.theta)))
    j_int = grid.integrate_boundary_values(data.j_at_angle(bdry_angles) * e_wr[0])

    def balance(rho: float) -> float:
        return np.log(2.0 * rho / f_int) - 2.0 * np.log(2.0 * (np.pi - rho) / j_int)

    try:
        rho0 = brentq(balance, 1e-12, np.pi - 1e-12, xtol=1e-14)
    except ValueError as exc:
        raise ConfigError(f"no admissible rho for concentrated data: {exc}") from exc

    alpha_bar = 2.0 * rho0 / f_int
    shift = -0.5 * np.log(alpha_bar * f_target)
    return FlowState(DiscField(grid, shape + shift), float(rho0), 0.0)
