"""Surfaces of revolution generated by an arclength-parametrized profile.

The surface is Psi(s, theta) = (a1(s) cos theta, a1(s) sin theta, a2(s)),
with r'(s) = (cos phi(s), sin phi(s)). The frame is

    T  = (cos phi cos theta, cos phi sin theta, sin phi)
    N  = (-sin theta, cos theta, 0)
    nu = (-sin phi cos theta, -sin phi sin theta, cos phi)

and the principal curvatures are taken exactly as kappa_T = phi' and
kappa_N = sin(phi) / a1. With this orientation the shape operator is
grad_M nu = -kappa_T T(x)T - kappa_N N(x)N, i.e. its matrix in the (s, theta)
chart is -I^{-1} II.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from nemfilm.errors import InvalidInputError, RangeError

ArrayFn = Callable[[np.ndarray], np.ndarray]

_S_SLACK = 1e-12


@dataclass(frozen=True)
class SurfaceOfRevolution:
    a1: ArrayFn
    a2: ArrayFn
    phi: ArrayFn
    dphi: ArrayFn
    s0: float
    L: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidInputError("profile length L must be positive")
        s = self.sample(33)
        if np.any(self.a1(s) <= 0):
            raise InvalidInputError("profile touches or crosses the axis (a1 <= 0)")

    @property
    def s1(self) -> float:
        return self.s0 + self.L

    def sample(self, n: int) -> np.ndarray:
        return np.linspace(self.s0, self.s1, n)

    def check_s(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        slack = _S_SLACK * max(1.0, abs(self.s1))
        if np.any(s < self.s0 - slack) or np.any(s > self.s1 + slack):
            raise RangeError(f"s outside [{self.s0}, {self.s1}]")
        return s

    def point(self, s, theta) -> np.ndarray:
        s = self.check_s(s)
        theta = np.asarray(theta, dtype=float)
        a1 = self.a1(s)
        return np.stack(
            np.broadcast_arrays(a1 * np.cos(theta), a1 * np.sin(theta), self.a2(s) + 0 * theta),
            axis=-1,
        )

    def unit_speed_defect(self, n: int = 65, h: float = 1e-6) -> float:
        """Max |(a1', a2') - (cos phi, sin phi)| by central differences at sampled s."""
        s = np.linspace(self.s0 + h, self.s1 - h, n)
        da1 = (self.a1(s + h) - self.a1(s - h)) / (2 * h)
        da2 = (self.a2(s + h) - self.a2(s - h)) / (2 * h)
        ph = self.phi(s)
        return float(np.max(np.hypot(da1 - np.cos(ph), da2 - np.sin(ph))))


def _const(v):
    return lambda s: np.full_like(np.asarray(s, dtype=float), v)


def frustum(phi0: float, s0: float = 1.0, L: float = 1.0) -> SurfaceOfRevolution:
    """Truncated cone r(s) = s (cos phi0, sin phi0), s in [s0, s0 + L]."""
    if not 0 < phi0 <= math.pi / 2 or s0 <= 0:
        raise InvalidInputError("frustum needs 0 < phi0 <= pi/2 and s0 > 0")
    c, sn = math.cos(phi0), math.sin(phi0)
    return SurfaceOfRevolution(
        a1=lambda s: np.asarray(s, dtype=float) * c,
        a2=lambda s: np.asarray(s, dtype=float) * sn,
        phi=_const(phi0),
        dphi=_const(0.0),
        s0=s0,
        L=L,
        name="frustum",
        params={"phi0": phi0, "s0": s0, "L": L},
    )


def cylinder(R: float = 1.0, s0: float = 0.0, L: float = 1.0) -> SurfaceOfRevolution:
    if R <= 0:
        raise InvalidInputError("radius must be positive")
    return SurfaceOfRevolution(
        a1=_const(R),
        a2=lambda s: np.asarray(s, dtype=float),
        phi=_const(math.pi / 2),
        dphi=_const(0.0),
        s0=s0,
        L=L,
        name="cylinder",
        params={"R": R, "s0": s0, "L": L},
    )


def sphere_cap(R: float = 1.0, s0: float = 0.3, L: float = 1.0) -> SurfaceOfRevolution:
    """Sphere zone with polar angle s/R in [s0/R, (s0+L)/R] (poles excluded)."""
    if R <= 0 or s0 <= 0 or s0 + L >= math.pi * R:
        raise InvalidInputError("sphere cap needs 0 < s0 < s0 + L < pi R")
    return SurfaceOfRevolution(
        a1=lambda s: R * np.sin(np.asarray(s, dtype=float) / R),
        a2=lambda s: -R * np.cos(np.asarray(s, dtype=float) / R),
        phi=lambda s: np.asarray(s, dtype=float) / R,
        dphi=_const(1.0 / R),
        s0=s0,
        L=L,
        name="sphere-cap",
        params={"R": R, "s0": s0, "L": L},
    )


def plane_annulus(s0: float = 1.0, L: float = 1.0) -> SurfaceOfRevolution:
    """Flat annulus s0 <= r <= s0 + L in the plane z = 0."""
    if s0 <= 0:
        raise InvalidInputError("inner radius must be positive")
    return SurfaceOfRevolution(
        a1=lambda s: np.asarray(s, dtype=float),
        a2=_const(0.0),
        phi=_const(0.0),
        dphi=_const(0.0),
        s0=s0,
        L=L,
        name="plane-annulus",
        params={"s0": s0, "L": L},
    )


NAMED_SURFACES: dict[str, Callable[..., SurfaceOfRevolution]] = {
    "frustum": frustum,
    "cylinder": cylinder,
    "sphere-cap": sphere_cap,
    "plane-annulus": plane_annulus,
}

SURFACE_PARAMS = {
    "frustum": "phi0 (rad, in (0, pi/2]), s0 > 0, L > 0",
    "cylinder": "R > 0, s0, L > 0",
    "sphere-cap": "R > 0, s0 > 0, L > 0 with s0 + L < pi R",
    "plane-annulus": "s0 > 0 (inner radius), L > 0",
}


def make_surface(name: str, **params) -> SurfaceOfRevolution:
    try:
        factory = NAMED_SURFACES[name]
    except KeyError:
        raise InvalidInputError(f"unknown surface {name!r}; choose from {sorted(NAMED_SURFACES)}")
    return factory(**params)


@dataclass(frozen=True)
class FramePoint:
    T: np.ndarray
    N: np.ndarray
    nu: np.ndarray

    def matrix(self) -> np.ndarray:
        """Rows T, N, nu."""
        return np.stack([self.T, self.N, self.nu], axis=-2)


def frame_at(surf: SurfaceOfRevolution, s, theta) -> FramePoint:
    """Orthonormal frame; broadcasts over array-valued s and theta."""
    s = surf.check_s(s)
    theta = np.asarray(theta, dtype=float)
    ph = surf.phi(s)
    cp, sp = np.cos(ph), np.sin(ph)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp, ct, st = np.broadcast_arrays(cp, sp, ct, st)
    zero = np.zeros_like(ct)
    T = np.stack([cp * ct, cp * st, sp], axis=-1)
    N = np.stack([-st, ct, zero], axis=-1)
    nu = np.stack([-sp * ct, -sp * st, cp], axis=-1)
    return FramePoint(T, N, nu)


def frame_derivatives(surf: SurfaceOfRevolution, s, theta) -> dict[str, np.ndarray]:
    """Analytic s- and theta-derivatives of T, N, nu."""
    f = frame_at(surf, s, theta)
    s = np.asarray(s, dtype=float)
    ph = surf.phi(s)
    dph = surf.dphi(s)
    cp, sp = np.cos(ph)[..., None], np.sin(ph)[..., None]
    dph = np.asarray(dph, dtype=float)[..., None]
    return {
        "T_s": dph * f.nu,
        "N_s": np.zeros_like(f.N),
        "nu_s": -dph * f.T,
        "T_theta": cp * f.N,
        "N_theta": sp * f.nu - cp * f.T,
        "nu_theta": -sp * f.N,
    }


@dataclass(frozen=True)
class CurvatureData:
    kappa_T: np.ndarray
    kappa_N: np.ndarray
    firstFF: np.ndarray
    secondFF: np.ndarray

    @property
    def gauss(self):
        return self.kappa_T * self.kappa_N


def _diag2(a, b) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.zeros(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def curvatures(surf: SurfaceOfRevolution, s) -> CurvatureData:
    s = surf.check_s(s)
    a1 = surf.a1(s)
    ph = surf.phi(s)
    dph = surf.dphi(s)
    return CurvatureData(
        kappa_T=np.asarray(dph, dtype=float),
        kappa_N=np.sin(ph) / a1,
        firstFF=_diag2(np.ones_like(a1), a1**2),
        secondFF=_diag2(dph, a1 * np.sin(ph)),
    )


@dataclass(frozen=True)
class ShapeOperator:
    matrix: np.ndarray
    eigenvalues: np.ndarray

    def ambient(self, frame: FramePoint) -> np.ndarray:
        """3x3 extension c_T T(x)T + c_N N(x)N; nu lies in its kernel."""
        cT = self.eigenvalues[..., 0][..., None, None]
        cN = self.eigenvalues[..., 1][..., None, None]
        T, N = frame.T, frame.N
        return cT * T[..., :, None] * T[..., None, :] + cN * N[..., :, None] * N[..., None, :]


def shape_operator(surf: SurfaceOfRevolution, s) -> ShapeOperator:
    """Chart matrix -I^{-1} II and its eigenvalues (-kappa_T, -kappa_N)."""
    cd = curvatures(surf, s)
    A = -np.linalg.solve(cd.firstFF, cd.secondFF)
    eig = np.stack([-cd.kappa_T, -cd.kappa_N + 0 * cd.kappa_T], axis=-1)
    return ShapeOperator(A, eig)


def area_element(surf: SurfaceOfRevolution, s):
    s = surf.check_s(s)
    return surf.a1(s)


def max_abs_curvature(surf: SurfaceOfRevolution, n: int = 513) -> float:
    cd = curvatures(surf, surf.sample(n))
    return float(max(np.abs(cd.kappa_T).max(), np.abs(cd.kappa_N).max()))


def surface_gradient(surf: SurfaceOfRevolution, s, theta, u_s, u_theta) -> np.ndarray:
    """Ambient surface gradient u_s T + u_theta / a1 N of scalar data (..., 3)."""
    f = frame_at(surf, s, theta)
    a1 = surf.a1(np.asarray(s, dtype=float))
    return np.asarray(u_s)[..., None] * f.T + (np.asarray(u_theta) / a1)[..., None] * f.N
