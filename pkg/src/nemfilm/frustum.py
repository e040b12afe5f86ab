"""Director winding on a frustum in the unit-modulus limit.

With |p| = 1 and p = (cos 2psi, sin 2psi), the s-independent part of the
reduced energy on a cone of complementary opening angle phi0 is

    F[psi] = int_0^{2 pi} 4 psi'^2 + 8 cos(phi0) psi' - sin^2(phi0) cos(2 psi) dtheta

over the sector D_k = {psi(2 pi) = psi(0) + pi k}. Profiles are stored as
psi = k theta / 2 + u(theta) with u periodic, so sector membership is exact.
Stationary profiles solve psi'' = sin^2(phi0)/4 sin(2 psi).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from nemfilm.errors import BracketError, InvalidInputError

PHI0_LOWER_BOUND = math.acos(math.sqrt(6) - 2)


@dataclass(frozen=True)
class FrustumGeometry:
    phi0: float
    s0: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        if not 0 < self.phi0 <= math.pi / 2:
            raise InvalidInputError("phi0 must lie in (0, pi/2]")
        if self.s0 <= 0 or self.L <= 0:
            raise InvalidInputError("need s0 > 0 and L > 0")

    @property
    def radial_prefactor(self) -> float:
        """int ds / a1 over [s0, s0 + L] (infinite for the degenerate cylinder)."""
        c = math.cos(self.phi0)
        if c < 1e-15:
            return math.inf
        return math.log((self.s0 + self.L) / self.s0) / c


@dataclass(frozen=True)
class PsiProfile:
    u: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def h(self) -> float:
        return 2 * math.pi / self.n

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @property
    def values(self) -> np.ndarray:
        return 0.5 * self.k * self.theta + self.u

    @classmethod
    def linear(cls, k: int, n: int = 256) -> "PsiProfile":
        return cls(np.zeros(n), k)

    @classmethod
    def from_values(cls, psi, k: int) -> "PsiProfile":
        psi = np.asarray(psi, dtype=float)
        theta = np.arange(psi.size) * 2 * math.pi / psi.size
        return cls(psi - 0.5 * k * theta, k)


def _slopes(u: np.ndarray, k: int, h: float) -> np.ndarray:
    """psi' at the half nodes theta_{j+1/2}."""
    return 0.5 * k + (np.roll(u, -1) - u) / h


def e0_energy(psi: PsiProfile, geom: FrustumGeometry) -> float:
    h = psi.h
    d = _slopes(psi.u, psi.k, h)
    c = math.cos(geom.phi0)
    s2 = math.sin(geom.phi0) ** 2
    return float(h * np.sum(4 * d * d + 8 * c * d - s2 * np.cos(2 * psi.values)))


def e0_energy_split(psi: PsiProfile, geom: FrustumGeometry) -> float:
    """Same energy written as 8 pi k cos(phi0) + int 4 psi'^2 - sin^2 cos 2psi."""
    h = psi.h
    d = _slopes(psi.u, psi.k, h)
    s2 = math.sin(geom.phi0) ** 2
    return float(
        8 * math.pi * psi.k * math.cos(geom.phi0)
        + h * np.sum(4 * d * d - s2 * np.cos(2 * psi.values))
    )


def _energy_grad(u, k, h, c, s2, theta):
    d = _slopes(u, k, h)
    psi = 0.5 * k * theta + u
    F = h * np.sum(4 * d * d + 8 * c * d - s2 * np.cos(2 * psi))
    flux = 8 * d + 8 * c
    g = np.roll(flux, 1) - flux + 2 * h * s2 * np.sin(2 * psi)
    return F, g, psi


def el_residual(psi: PsiProfile, geom: FrustumGeometry) -> float:
    """max |psi'' - sin^2(phi0)/4 sin(2 psi)| with the three-point second difference."""
    v = psi.values
    h = psi.h
    # periodic wrap adds the k*pi jump back
    nxt = np.roll(v, -1) + np.where(np.arange(psi.n) == psi.n - 1, math.pi * psi.k, 0.0)
    prv = np.roll(v, 1) - np.where(np.arange(psi.n) == 0, math.pi * psi.k, 0.0)
    lap = (nxt - 2 * v + prv) / (h * h)
    s2 = math.sin(geom.phi0) ** 2
    return float(np.max(np.abs(lap - 0.25 * s2 * np.sin(2 * v))))


@dataclass(frozen=True)
class SectorResult:
    k: int
    energy: float
    profile: PsiProfile
    residual: float
    n_iters: int
    converged: bool


def _newton(u, k, geom, tol, max_iter):
    n = u.size
    h = 2 * math.pi / n
    theta = np.arange(n) * h
    c = math.cos(geom.phi0)
    s2 = math.sin(geom.phi0) ** 2
    lap = (16 / h) * np.eye(n) - (8 / h) * (np.eye(n, k=1) + np.eye(n, k=-1))
    lap[0, -1] = lap[-1, 0] = -8 / h
    F, g, psi = _energy_grad(u, k, h, c, s2, theta)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) / (8 * h) <= tol:
            it -= 1
            break
        H = lap + np.diag(4 * h * s2 * np.cos(2 * psi))
        tau = 0.0
        while True:
            try:
                cf = scipy.linalg.cho_factor(H + tau * np.eye(n))
                break
            except np.linalg.LinAlgError:
                tau = max(2 * tau, 1e-8 * 16 / h)
        step = -scipy.linalg.cho_solve(cf, g)
        slope = g @ step
        alpha = 1.0
        while True:
            un = u + alpha * step
            Fn, gn, psin = _energy_grad(un, k, h, c, s2, theta)
            if Fn <= F + 1e-4 * alpha * slope or alpha < 1e-12:
                break
            alpha *= 0.5
        if Fn > F:
            break
        u, F, g, psi = un, Fn, gn, psin
    prof = PsiProfile(u, k)
    res = el_residual(prof, geom)
    return prof, F, res, it


def _smooth_start(rng: np.random.Generator, n: int, modes: int = 3) -> np.ndarray:
    theta = np.arange(n) * 2 * math.pi / n
    u = np.zeros(n)
    for m in range(1, modes + 1):
        a, b = rng.normal(scale=0.5 / m, size=2)
        u += a * np.cos(m * theta) + b * np.sin(m * theta)
    return u


def minimize_in_sector(
    k: int,
    geom: FrustumGeometry,
    n: int = 256,
    n_starts: int = 5,
    tol: float = 1e-9,
    max_iter: int = 500,
    seed: int = 0,
) -> SectorResult:
    """Minimize F over D_k by damped Newton descent from several starts.

    The first start is u = 0 (the linear profile k theta / 2); the others add
    random low-mode perturbations. The lowest-energy stationary result wins.
    """
    if n < 64:
        raise InvalidInputError("need at least 64 grid points")
    rng = np.random.default_rng(seed)
    starts = [np.zeros(n)] + [_smooth_start(rng, n) for _ in range(n_starts - 1)]
    best = None
    for u0 in starts:
        prof, F, res, it = _newton(u0, k, geom, tol, max_iter)
        cand = SectorResult(k, F, prof, res, it, res <= max(tol, 1e-6))
        if best is None or (cand.converged, -cand.energy) > (best.converged, -best.energy):
            best = cand
    return best


def sector_compare(
    geom: FrustumGeometry, k_list=(0, -1, -2, -3), n: int = 256, **opts
) -> list[SectorResult]:
    if len(k_list) == 0:
        raise InvalidInputError("k_list must be nonempty")
    return [minimize_in_sector(k, geom, n=n, **opts) for k in k_list]


def sector_difference(phi0: float, n: int = 256, **opts) -> float:
    """min over D_{-1} minus min over D_0 (negative when winding is preferred)."""
    geom = FrustumGeometry(phi0)
    e1 = minimize_in_sector(-1, geom, n=n, **opts).energy
    e0 = minimize_in_sector(0, geom, n=n, **opts).energy
    return e1 - e0


def critical_angle(bracket=(0.3, 1.5), tol: float = 1e-3, n: int = 256, **opts) -> float:
    """Bisect the phi0 at which sectors 0 and -1 exchange stability."""
    lo, hi = map(float, bracket)
    flo = sector_difference(lo, n=n, **opts)
    fhi = sector_difference(hi, n=n, **opts)
    if np.sign(flo) == np.sign(fhi) or flo == 0 or fhi == 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: {flo:.3g}, {fhi:.3g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = sector_difference(mid, n=n, **opts)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SweepRow:
    phi0: float
    k: int
    energy: float
    el_residual: float
    n_iters: int
    converged: bool


def _sweep_one(args) -> list[SweepRow]:
    phi0, k_list, n, opts = args
    geom = FrustumGeometry(phi0)
    return [
        SweepRow(phi0, r.k, r.energy, r.residual, r.n_iters, r.converged)
        for r in sector_compare(geom, k_list, n=n, **opts)
    ]


def sweep(phi0_values, k_list=(0, -1, -2, -3), n: int = 256, jobs: int = 1, **opts):
    """Sector minima over a grid of phi0; rows ordered by (phi0, k_list order)."""
    tasks = [(float(p), tuple(k_list), n, opts) for p in phi0_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_sweep_one, tasks))
    else:
        chunks = [_sweep_one(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]
