"""Polar pseudospectral discretization of the closed unit disc.

The disc is discretized with a Fourier basis in the angle and a Chebyshev
basis in the radius, using the doubled-radius parity trick: the radial
coordinate is extended to [-1, 1] through u(-r, theta) = u(r, theta + pi),
and the Chebyshev-Gauss-Lobatto grid of odd order on the doubled interval
is used so that no node sits at the coordinate singularity r = 0.

Fields live on the (n_r, n_theta) tensor grid with radii descending from
r = 1 (row 0 is the boundary circle).  All operators are spectrally
accurate for functions smooth on the disc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SolvabilityError


def _cheb_nodes_and_diff(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Gauss-Lobatto nodes (descending) and differentiation matrix."""
    n = order
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def _fourier_diff(n: int) -> np.ndarray:
    """Dense spectral differentiation matrix for n equispaced periodic nodes."""
    j = np.arange(1, n)
    col = np.concatenate(([0.0], 0.5 * (-1.0) ** j / np.tan(np.pi * j / n)))
    row_idx = np.arange(n)[:, None]
    col_idx = np.arange(n)[None, :]
    return col[(row_idx - col_idx) % n]


class DiscGrid:
    """Tensor grid on the unit disc with precomputed spectral operators.

    Parameters
    ----------
    n_r : int
        Number of radial nodes on (0, 1].  The doubled Chebyshev grid has
        order 2*n_r - 1, which is odd, so the origin is never a node.
    n_theta : int
        Number of equispaced angles; must be even so that theta + pi is an
        exact grid shift.
    """

    def __init__(self, n_r: int = 32, n_theta: int = 64):
        if n_theta % 2 != 0 or n_theta < 8:
            raise ValueError("n_theta must be even and >= 8")
        if n_r < 8:
            raise ValueError("n_r must be >= 8")
        self.n_r = n_r
        self.n_theta = n_theta

        order = 2 * n_r - 1
        x, d1 = _cheb_nodes_and_diff(order)
        d2 = d1 @ d1
        self._x_doubled = x
        self.r = x[:n_r]                      # descending, r[0] = 1
        self.theta = 2.0 * np.pi * np.arange(n_theta) / n_theta

        # split differentiation into the direct block and the parity block
        # acting on the pi-rotated field
        self._d1_pos = d1[:n_r, :n_r]
        self._d1_neg = d1[:n_r, n_r:][:, ::-1]
        self._d2_pos = d2[:n_r, :n_r]
        self._d2_neg = d2[:n_r, n_r:][:, ::-1]

        # angular wavenumbers for numpy's fft layout
        self.k = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
        self._ik = 1j * self.k
        self._ik[n_theta // 2] = 0.0          # Nyquist has no odd derivative
        self._parity = np.where(np.abs(self.k).astype(int) % 2 == 0, 1.0, -1.0)

        # Clenshaw-Curtis-type radial weights for the measure r dr on (0, 1]:
        # q_j = integral_0^1 x l_j(x) dx over doubled-grid cardinal functions,
        # folded by parity.  Exact for the full polynomial space of the grid.
        q = self._half_interval_moment_weights(x)
        self.w_r = q[:n_r] + q[::-1][:n_r]
        if not np.all(self.w_r > 0):
            raise RuntimeError("non-positive radial quadrature weights")
        self.w_theta = np.full(n_theta, 2.0 * np.pi / n_theta)
        self.w_area = np.outer(self.w_r, self.w_theta)

        xx = np.cos(self.theta)[None, :] * self.r[:, None]
        yy = np.sin(self.theta)[None, :] * self.r[:, None]
        self.x = xx
        self.y = yy
        self.z = xx + 1j * yy

        self._dense_ops: dict[str, np.ndarray] = {}
        self._mode_stack: tuple[np.ndarray, np.ndarray] | None = None

    @staticmethod
    def _half_interval_moment_weights(x: np.ndarray) -> np.ndarray:
        n = len(x) - 1
        vander = np.cos(np.arange(n + 1)[None, :] * np.arccos(np.clip(x, -1, 1))[:, None])
        xg, wg = np.polynomial.legendre.leggauss(2 * (n + 1))
        xg = 0.5 * (xg + 1.0)
        wg = 0.5 * wg
        tg = np.cos(np.arange(n + 1)[:, None] * np.arccos(xg)[None, :])
        moments = tg @ (wg * xg)              # m_k = int_0^1 x T_k(x) dx
        coeff_map = np.linalg.solve(vander, np.eye(n + 1))
        return coeff_map.T @ moments

    # -- elementary checks -------------------------------------------------

    def check_field(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_r, self.n_theta):
            raise ShapeError(
                f"field shape {values.shape} != grid shape {(self.n_r, self.n_theta)}"
            )
        return values

    def check_boundary(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_theta,):
            raise ShapeError(f"boundary shape {values.shape} != ({self.n_theta},)")
        return values

    # -- differential operators --------------------------------------------

    def _rotate_pi(self, values: np.ndarray) -> np.ndarray:
        return np.roll(values, self.n_theta // 2, axis=-1)

    def dr(self, values: np.ndarray) -> np.ndarray:
        """Radial derivative via the parity-folded Chebyshev operator."""
        return self._d1_pos @ values + self._d1_neg @ self._rotate_pi(values)

    def drr(self, values: np.ndarray) -> np.ndarray:
        return self._d2_pos @ values + self._d2_neg @ self._rotate_pi(values)

    def dtheta(self, values: np.ndarray) -> np.ndarray:
        u = np.fft.rfft(values, axis=-1)
        kr = self.k[: self.n_theta // 2 + 1].copy()
        kr[-1] = 0.0  # no odd derivative of the Nyquist mode
        return np.fft.irfft(1j * np.abs(kr) * u, n=self.n_theta, axis=-1)

    def dtheta2(self, values: np.ndarray) -> np.ndarray:
        u = np.fft.rfft(values, axis=-1)
        kr = np.abs(self.k[: self.n_theta // 2 + 1])
        return np.fft.irfft(-(kr ** 2) * u, n=self.n_theta, axis=-1)

    def laplacian_values(self, values: np.ndarray) -> np.ndarray:
        rot = self._rotate_pi(values)
        ur = self._d1_pos @ values + self._d1_neg @ rot
        urr = self._d2_pos @ values + self._d2_neg @ rot
        r = self.r[:, None]
        return urr + ur / r + self.dtheta2(values) / r ** 2

    def gradient_values(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ur = self.dr(values)
        ut = self.dtheta(values) / self.r[:, None]
        ct = np.cos(self.theta)[None, :]
        st = np.sin(self.theta)[None, :]
        return ct * ur - st * ut, st * ur + ct * ut

    def normal_derivative_values(self, values: np.ndarray) -> np.ndarray:
        return self._d1_pos[0] @ values + self._d1_neg[0] @ self._rotate_pi(values)

    # -- quadrature ----------------------------------------------------------

    def integrate_values(self, values: np.ndarray) -> float:
        return float(np.sum(self.w_area * values))

    def integrate_boundary_values(self, values: np.ndarray) -> float:
        return float(np.sum(self.w_theta * values))

    # -- interpolation --------------------------------------------------------

    def _barycentric_rows(self, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Barycentric interpolation rows on the doubled grid, parity-folded.

        Returns (b_pos, b_neg) with shapes (npts, n_r); the value of mode m at
        radius rho is (b_pos + (-1)^m b_neg) @ u_m.
        """
        x = self._x_doubled
        n = len(x) - 1
        w = (-1.0) ** np.arange(n + 1)
        w[0] *= 0.5
        w[-1] *= 0.5
        diff = radii[:, None] - x[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-14)
        diff = np.where(exact, 1.0, diff)
        rows = w[None, :] / diff
        rows /= rows.sum(axis=1)[:, None]
        hit = exact.any(axis=1)
        if np.any(hit):
            rows[hit] = 0.0
            rows[exact] = 1.0
        return rows[:, : self.n_r], rows[:, self.n_r:][:, ::-1]

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a field at arbitrary points of the closed disc.

        Fourier interpolation in the angle and barycentric Chebyshev
        interpolation in the (doubled) radius; spectrally accurate.

        Parameters
        ----------
        values : (n_r, n_theta) array
        points : complex array of evaluation points, |z| <= 1
        """
        pts = np.asarray(points, dtype=complex)
        shape = pts.shape
        pts = pts.ravel()
        radii = np.abs(pts)
        if np.any(radii > 1.0 + 1e-10):
            raise ValueError("interpolation points outside the closed disc")
        radii = np.minimum(radii, 1.0)
        angles = np.angle(pts)

        modes = np.fft.fft(values, axis=-1)   # (n_r, n_theta)
        b_pos, b_neg = self._barycentric_rows(radii)
        modal = b_pos @ modes + (b_neg @ modes) * self._parity[None, :]

        nt = self.n_theta
        phases = np.exp(1j * np.outer(angles, self.k))
        phases[:, nt // 2] = np.cos(self.k[nt // 2] * angles)
        out = np.real(np.sum(modal * phases, axis=1)) / nt
        return out.reshape(shape)

    def interpolate_boundary(self, values: np.ndarray, angles: np.ndarray) -> np.ndarray:
        """Trigonometric interpolation of a boundary field at given angles."""
        modes = np.fft.fft(values)
        nt = self.n_theta
        phases = np.exp(1j * np.outer(np.asarray(angles).ravel(), self.k))
        phases[:, nt // 2] = np.cos(self.k[nt // 2] * np.asarray(angles).ravel())
        out = np.real(phases @ modes) / nt
        return out.reshape(np.shape(angles))

    # -- per-mode elliptic solves ----------------------------------------------

    def _mode_operator(self, m: int) -> np.ndarray:
        """Radial operator of the Laplacian restricted to Fourier mode m."""
        sign = 1.0 if m % 2 == 0 else -1.0
        d1 = self._d1_pos + sign * self._d1_neg
        d2 = self._d2_pos + sign * self._d2_neg
        rinv = 1.0 / self.r
        return d2 + rinv[:, None] * d1 - (m ** 2) * np.diag(rinv ** 2)

    def _mode_dr(self, m: int) -> np.ndarray:
        sign = 1.0 if m % 2 == 0 else -1.0
        return self._d1_pos + sign * self._d1_neg

    def _mode_operator_stack(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked radial operators and boundary-derivative rows, one per fft slot."""
        if self._mode_stack is None:
            abs_m = np.abs(self.k).astype(int)
            ops = np.empty((self.n_theta, self.n_r, self.n_r))
            dr_rows = np.empty((self.n_theta, self.n_r))
            cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
            for slot, m in enumerate(abs_m):
                if m not in cache:
                    cache[m] = (self._mode_operator(m), self._mode_dr(m)[0])
                ops[slot], dr_rows[slot] = cache[m]
            self._mode_stack = (ops, dr_rows)
        return self._mode_stack

    def helmholtz_factor(self, c: float) -> "HelmholtzFactorization":
        """Precompute the per-mode inverses and homogeneous data for (c - Lap)."""
        if c < 0:
            raise ValueError("c must be >= 0")
        n_r, nt = self.n_r, self.n_theta
        ops, dr_rows = self._mode_operator_stack()
        a = c * np.eye(n_r)[None, :, :] - ops
        a[:, 0, :] = 0.0                               # Dirichlet pin at r = 1;
        a[:, 0, 0] = 1.0                               # true BC enters via u_hom
        a_inv = np.linalg.inv(a)
        u_hom = a_inv[:, :, 0].T.copy()                # response to trace 1
        h_deriv = np.einsum("mj,jm->m", dr_rows, u_hom)
        phases = np.exp(1j * np.outer(self.theta, self.k))
        return HelmholtzFactorization(self, c, a_inv, u_hom, h_deriv, phases)

    def helmholtz_solve(
        self,
        c: float,
        rhs: np.ndarray,
        p: np.ndarray | float,
        q: np.ndarray | float,
        boundary_data: np.ndarray | float = 0.0,
    ) -> np.ndarray:
        """Solve (c - Lap) u = rhs in B with p*u + q*du/dnu = boundary_data.

        The equation is decoupled into Fourier modes and solved with dense
        radial collocation matrices.  Angle-dependent Robin coefficients
        couple the modes only through the boundary row; that coupling is
        resolved with a particular-plus-homogeneous splitting and a single
        dense solve of size n_theta.

        Raises
        ------
        SolvabilityError
            For the singular pure-Neumann problem with c = 0 and data that
            violates the compatibility condition; compatible data returns
            the mean-zero solution.
        """
        return self.helmholtz_factor(c).solve(rhs, p, q, boundary_data)

    # -- dense flattened operators (Steklov assembly) ---------------------------

    def dense_operator(self, name: str) -> np.ndarray:
        """Dense matrix of d/dx, d/dy on fields flattened in C order."""
        if name in self._dense_ops:
            return self._dense_ops[name]
        n_r, nt = self.n_r, self.n_theta
        eye_t = np.eye(nt)
        shift = np.roll(eye_t, nt // 2, axis=0).T
        d_r = np.kron(self._d1_pos, eye_t) + np.kron(self._d1_neg, shift)
        d_t = np.kron(np.eye(n_r), _fourier_diff(nt))
        ct = np.cos(self.theta)
        st = np.sin(self.theta)
        rinv = 1.0 / self.r
        cos_d = np.tile(ct, n_r)
        sin_d = np.tile(st, n_r)
        rinv_d = np.repeat(rinv, nt)
        ops = {
            "dx": cos_d[:, None] * d_r - (sin_d * rinv_d)[:, None] * d_t,
            "dy": sin_d[:, None] * d_r + (cos_d * rinv_d)[:, None] * d_t,
        }
        self._dense_ops.update(ops)
        return self._dense_ops[name]

    def __repr__(self) -> str:
        return f"DiscGrid(n_r={self.n_r}, n_theta={self.n_theta})"


class HelmholtzFactorization:
    """Reusable per-mode factorization of (c - Lap) with pinned boundary row."""

    def __init__(self, grid: DiscGrid, c: float, a_inv, u_hom, h_deriv, phases):
        self.grid = grid
        self.c = c
        self._a_inv = a_inv          # (n_theta, n_r, n_r)
        self._u_hom = u_hom          # (n_r, n_theta), real
        self._h_deriv = h_deriv      # (n_theta,)
        self._phases = phases        # (n_theta, n_theta) modal synthesis

    def solve(
        self,
        rhs: np.ndarray,
        p: np.ndarray | float,
        q: np.ndarray | float,
        boundary_data: np.ndarray | float = 0.0,
    ) -> np.ndarray:
        grid = self.grid
        rhs = grid.check_field(rhs)
        nt = grid.n_theta
        p_arr = np.broadcast_to(np.asarray(p, dtype=float), (nt,))
        q_arr = np.broadcast_to(np.asarray(q, dtype=float), (nt,))
        g_arr = np.broadcast_to(np.asarray(boundary_data, dtype=float), (nt,))
        if np.all(p_arr == 0.0) and np.all(q_arr == 0.0):
            raise ValueError("Robin data must not vanish identically")

        singular = np.all(p_arr == 0.0) and self.c == 0.0
        if singular:
            # -Lap u = rhs needs int_B rhs + int_dB (g/q) = 0
            compat = grid.integrate_values(rhs) + grid.integrate_boundary_values(g_arr / q_arr)
            if abs(compat) > 1e-9 * max(1.0, float(np.max(np.abs(rhs)))):
                raise SolvabilityError(
                    "pure Neumann problem with c = 0 and incompatible data"
                )

        rhs_modes = np.fft.fft(rhs, axis=-1).T[:, :, None]   # (n_theta, n_r, 1)
        rhs_modes[:, 0, 0] = 0.0
        u_part = np.matmul(self._a_inv, rhs_modes)[:, :, 0].T

        # boundary collocation for the homogeneous amplitudes gamma:
        # sum_m gamma_m (p + q h_m) e^{i m theta_j} = g - p u_p(1,.) - q d_r u_p(1,.)
        u_part_phys = np.real(np.fft.ifft(u_part, axis=-1))
        target = g_arr - p_arr * u_part_phys[0] - q_arr * grid.dr(u_part_phys)[0]
        mat = (p_arr[:, None] + q_arr[:, None] * self._h_deriv[None, :]) * self._phases
        if singular:
            # the m = 0 homogeneous solution is the constant nullspace; drop
            # its (zero) boundary column and fix the mean afterwards
            mat = mat.copy()
            mat[:, grid.k == 0] = 0.0
            gamma = np.linalg.lstsq(mat, target.astype(complex), rcond=None)[0]
        else:
            gamma = np.linalg.solve(mat, target.astype(complex))

        u = u_part_phys + np.real((self._u_hom * gamma[None, :]) @ self._phases.T)
        if singular:
            u -= grid.integrate_values(u) / np.pi
        return u


@dataclass
class DiscField:
    """Scalar field sampled on a DiscGrid; row 0 is the boundary circle."""

    grid: DiscGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = self.grid.check_field(self.values)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite entries in DiscField")

    def boundary(self) -> "BoundaryField":
        return BoundaryField(self.grid, self.values[0].copy())

    def copy(self) -> "DiscField":
        return DiscField(self.grid, self.values.copy())

    def to_dict(self) -> dict:
        return {
            "kind": "disc_field",
            "n_r": self.grid.n_r,
            "n_theta": self.grid.n_theta,
            "values": self.values.ravel().tolist(),
        }

    @staticmethod
    def from_dict(data: dict, grid: DiscGrid | None = None) -> "DiscField":
        if data.get("kind") != "disc_field":
            raise ValueError("not a disc_field container")
        if grid is None:
            grid = DiscGrid(int(data["n_r"]), int(data["n_theta"]))
        values = np.array(data["values"], dtype=float).reshape(grid.n_r, grid.n_theta)
        return DiscField(grid, values)


@dataclass
class BoundaryField:
    """Scalar field on the boundary circle at the angular nodes."""

    grid: DiscGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = self.grid.check_boundary(self.values)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite entries in BoundaryField")

    def copy(self) -> "BoundaryField":
        return BoundaryField(self.grid, self.values.copy())

    def to_dict(self) -> dict:
        return {
            "kind": "boundary_field",
            "n_theta": self.grid.n_theta,
            "values": self.values.tolist(),
        }

    @staticmethod
    def from_dict(data: dict, grid: DiscGrid) -> "BoundaryField":
        if data.get("kind") != "boundary_field":
            raise ValueError("not a boundary_field container")
        return BoundaryField(grid, np.array(data["values"], dtype=float))


# -- public operations on typed fields -------------------------------------


def laplacian(u: DiscField) -> DiscField:
    """Pointwise polar Laplacian u_rr + u_r/r + u_tt/r^2."""
    return DiscField(u.grid, u.grid.laplacian_values(u.values))


def normal_derivative(u: DiscField) -> BoundaryField:
    """Outward radial derivative on the boundary circle."""
    return BoundaryField(u.grid, u.grid.normal_derivative_values(u.values))


def gradient(u: DiscField) -> tuple[DiscField, DiscField]:
    """Cartesian gradient components (u_x, u_y)."""
    ux, uy = u.grid.gradient_values(u.values)
    return DiscField(u.grid, ux), DiscField(u.grid, uy)


def integrate_disc(w: DiscField) -> float:
    """Quadrature of the area integral with Jacobian r."""
    return w.grid.integrate_values(w.values)


def integrate_boundary(w: BoundaryField) -> float:
    """Trapezoid quadrature of the boundary line integral."""
    return w.grid.integrate_boundary_values(w.values)


def harmonic_extension(b: BoundaryField) -> DiscField:
    """Harmonic function with Dirichlet trace b, mode by mode b_m r^|m|."""
    grid = b.grid
    modes = np.fft.fft(b.values)
    abs_m = np.abs(grid.k).astype(int)
    radial = grid.r[:, None] ** abs_m[None, :]
    field = np.real(np.fft.ifft(modes[None, :] * radial, axis=-1))
    field[0] = b.values  # exact trace
    return DiscField(grid, field)


def helmholtz_solve(
    c: float,
    rhs: DiscField,
    robin: tuple[BoundaryField | float, BoundaryField | float],
    boundary_data: BoundaryField | float = 0.0,
) -> DiscField:
    """Typed wrapper of DiscGrid.helmholtz_solve."""
    grid = rhs.grid
    p, q = robin
    p_vals = p.values if isinstance(p, BoundaryField) else p
    q_vals = q.values if isinstance(q, BoundaryField) else q
    g_vals = boundary_data.values if isinstance(boundary_data, BoundaryField) else boundary_data
    return DiscField(grid, grid.helmholtz_solve(c, rhs.values, p_vals, q_vals, g_vals))
