"""Moebius group of the disc, conformal pullbacks, and cap geometry.

The disc automorphisms are parameterized as phi(z) = e^{i theta}(z + a)/(1 + conj(a) z)
with |a| < 1.  Conformal factors pull back by v = u o phi + (1/2) log det(d phi),
which preserves all metric integrals; the scaled inverse stereographic
projection provides the spherical-cap reference geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import BoundaryField, DiscField, DiscGrid


@dataclass(frozen=True)
class MobiusMap:
    """Disc automorphism z -> e^{i theta} (z + a) / (1 + conj(a) z)."""

    a: complex = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if abs(self.a) >= 1.0 - 1e-12:
            raise DomainError(f"Moebius parameter |a| = {abs(self.a)} too close to 1")

    @property
    def is_identity(self) -> bool:
        return self.a == 0 and self.theta % (2.0 * np.pi) == 0.0


def apply(phi: MobiusMap, z):
    """Evaluate the Moebius map on points of the closed disc."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + 1e-10):
        raise DomainError("Moebius map evaluated outside the closed disc")
    w = np.exp(1j * phi.theta) * (z + phi.a) / (1.0 + np.conj(phi.a) * z)
    # |phi(z)| <= 1 analytically; clip the roundoff excess
    mag = np.abs(w)
    w = np.where(mag > 1.0, w / mag, w)
    return w if w.ndim else complex(w)


def inverse(phi: MobiusMap) -> MobiusMap:
    return MobiusMap(-phi.a * np.exp(1j * phi.theta), -phi.theta)


def compose(phi1: MobiusMap, phi2: MobiusMap) -> MobiusMap:
    """Composition phi1 o phi2 as a MobiusMap."""
    e2 = np.exp(1j * phi2.theta)
    c1 = np.exp(1j * phi1.theta) * (e2 + phi1.a * np.conj(phi2.a))
    c0 = np.exp(1j * phi1.theta) * (e2 * phi2.a + phi1.a)
    d0 = 1.0 + np.conj(phi1.a) * phi2.a * e2
    a = c0 / c1
    rot = c1 / d0
    return MobiusMap(complex(a), float(np.angle(rot)))


def log_deriv_modulus(phi: MobiusMap, z) -> np.ndarray:
    """log |phi'(z)| = (1/2) log det(d phi), from the closed form."""
    z = np.asarray(z, dtype=complex)
    a = phi.a
    return np.log(1.0 - abs(a) ** 2) - 2.0 * np.log(np.abs(1.0 + np.conj(a) * z))


def pullback_conformal_factor(u: DiscField, phi: MobiusMap) -> DiscField:
    """Normalized companion v = u o phi + (1/2) log det(d phi) on the grid."""
    grid = u.grid
    if phi.is_identity:
        return u.copy()
    mapped = apply(phi, grid.z)
    composed = grid.interpolate(u.values, mapped)
    return DiscField(grid, composed + log_deriv_modulus(phi, grid.z))


def pullback_boundary(b: BoundaryField, phi: MobiusMap) -> BoundaryField:
    """Boundary trace of w o phi for a boundary function w (no conformal weight)."""
    grid = b.grid
    mapped_angles = np.angle(apply(phi, np.exp(1j * grid.theta)))
    return BoundaryField(grid, grid.interpolate_boundary(b.values, mapped_angles))


def compose_scalar(values_fn, phi: MobiusMap, grid: DiscGrid) -> np.ndarray:
    """Sample f o phi on the grid for a callable f(x, y)."""
    mapped = apply(phi, grid.z)
    return np.asarray(values_fn(mapped.real, mapped.imag), dtype=float) * np.ones(grid.z.shape)


@dataclass(frozen=True)
class CapGeometry:
    """Spherical cap of scaled stereographic radius R.

    r = 2R/(1+R^2) is the Euclidean radius of the boundary circle on the
    sphere, sigma its height, and k_R = (1-R^2)/(2R) = sigma/r its geodesic
    curvature in the round metric.
    """

    R: float
    r: float = field(init=False)
    sigma: float = field(init=False)
    k_R: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.R <= 1.0:
            raise DomainError("cap radius parameter R must lie in (0, 1]")
        object.__setattr__(self, "r", 2.0 * self.R / (1.0 + self.R ** 2))
        object.__setattr__(self, "sigma", (1.0 - self.R ** 2) / (1.0 + self.R ** 2))
        object.__setattr__(self, "k_R", (1.0 - self.R ** 2) / (2.0 * self.R))


def stereographic(R: float, z) -> np.ndarray:
    """psi_R(z) = 2Rz/(1 + |Rz|^2), the planar part of the lifted point."""
    if not 0.0 < R <= 1.0:
        raise DomainError("R must lie in (0, 1]")
    z = np.asarray(z, dtype=complex)
    w = 2.0 * R * z / (1.0 + (R * np.abs(z)) ** 2)
    return np.stack([w.real, w.imag], axis=-1)


def stereographic_lift(R: float, z) -> np.ndarray:
    """Full lift Psi_R(z) in R^3 (last axis), with |Psi_R| = 1."""
    if not 0.0 < R <= 1.0:
        raise DomainError("R must lie in (0, 1]")
    z = np.asarray(z, dtype=complex)
    denom = 1.0 + (R * np.abs(z)) ** 2
    return np.stack(
        [2.0 * R * z.real / denom, 2.0 * R * z.imag / denom, (2.0 - denom) / denom],
        axis=-1,
    )


def cap_metric_factor(R: float, grid: DiscGrid) -> DiscField:
    """Conformal factor e^{w_R} = 2R/(1 + R^2 |z|^2) of the pulled-back round metric."""
    if not 0.0 < R <= 1.0:
        raise DomainError("R must lie in (0, 1]")
    return DiscField(grid, 2.0 * R / (1.0 + (R * np.abs(grid.z)) ** 2))


def scaling_radius(f0: float, j0: float) -> float:
    """Radius R = sqrt(1 + j0^2/f0) - j0/sqrt(f0) of the limiting cap."""
    if f0 <= 0.0:
        raise DomainError("scaling radius needs f > 0")
    if j0 < 0.0:
        raise DomainError("scaling radius needs j >= 0")
    return float(np.sqrt(1.0 + j0 ** 2 / f0) - j0 / np.sqrt(f0))


def big_J(f: DiscField, j_harmonic: DiscField) -> DiscField:
    """Driving potential J = j + sqrt(j^2 + f) with j extended harmonically."""
    if np.min(f.values) <= 0.0:
        raise DomainError("J requires f > 0 pointwise")
    vals = j_harmonic.values + np.sqrt(j_harmonic.values ** 2 + f.values)
    return DiscField(f.grid, vals)


def grad_J_at(J: DiscField, z0: complex) -> np.ndarray:
    """Cartesian gradient of J evaluated at a point of the closed disc."""
    grid = J.grid
    jx, jy = grid.gradient_values(J.values)
    pt = np.asarray([z0], dtype=complex)
    return np.array([grid.interpolate(jx, pt)[0], grid.interpolate(jy, pt)[0]])


def normal_derivative_J(J: DiscField, z0: complex) -> float:
    """Outward normal derivative of J at a boundary point."""
    if abs(abs(z0) - 1.0) > 1e-8:
        raise DomainError("normal derivative is defined at boundary points")
    g = grad_J_at(J, z0 / abs(z0))
    nu = np.array([z0.real, z0.imag]) / abs(z0)
    return float(g @ nu)
