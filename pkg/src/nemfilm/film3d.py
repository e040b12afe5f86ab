"""Full three-dimensional energy on a thin shell over a surface of revolution.

Points of the shell are X = x + eps t nu(x) with x on the surface and
t in [-1, 1]. For f_hat(x, t) = f(x + eps t nu(x)),

    grad_X f = (grad_M f_hat + f_hat_t nu / eps) Phi,
    Phi = (I + eps t grad_M nu)^{-1} = TT/(1 - eps t kT) + NN/(1 - eps t kN) + nu nu,

and dV = eps (1 - eps t kT)(1 - eps t kN) a1 ds dtheta dt. Both are used
exactly (no expansion in eps). The rescaled energy is

    F_eps = 1/eps int (f_e + delta^-2 f_LdG) dV + 1/eps sum_{+-} int f_s(Q, nu) dA.

Derivatives are second-order finite differences: one-sided at the s and t
edges, periodic in theta.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nemfilm.elastic import (
    AnchoringParams,
    ElasticConstants,
    LdGParams,
    f_e,
    f_ldg,
    f_s_split,
)
from nemfilm.errors import AdmissibilityError, FoldError, InvalidInputError
from nemfilm.qtensor import assemble_p_field
from nemfilm.remnant import closed_form_G_arrays, f_e0_field
from nemfilm.surface import SurfaceOfRevolution, curvatures, frame_at, max_abs_curvature

ADMISSIBLE_TOL = 1e-10


@dataclass(frozen=True)
class FilmParams:
    elastic: ElasticConstants = field(default_factory=ElasticConstants)
    ldg: LdGParams = field(default_factory=LdGParams)
    anchoring: AnchoringParams = field(default_factory=AnchoringParams)

    @property
    def delta(self) -> float:
        return self.ldg.delta


def fold_bound(surf: SurfaceOfRevolution) -> float:
    """Largest admissible eps: the normal map folds once eps max|kappa| >= 1."""
    k = max_abs_curvature(surf)
    return math.inf if k == 0 else 1.0 / k


def _stretch(kappa, t, eps):
    """1 - eps t kappa, with a fold check."""
    f = 1.0 - eps * t * kappa
    if np.any(f <= 0):
        raise FoldError(f"normal map folds: min(1 - eps t kappa) = {np.min(f):.3g}")
    return f


@dataclass(frozen=True)
class ShellGrid:
    """Uniform (s, theta, t) nodes on the shell of half-thickness eps."""

    surface: SurfaceOfRevolution
    eps: float
    ns: int = 64
    ntheta: int = 128
    nt: int = 16

    def __post_init__(self):
        if self.eps < 0:
            raise InvalidInputError("eps must be nonnegative")
        if self.ns < 3 or self.ntheta < 4 or self.nt < 3:
            raise InvalidInputError("grid too small for second-order stencils")
        cd = curvatures(self.surface, self.s)
        kmax = float(max(np.abs(cd.kappa_T).max(), np.abs(cd.kappa_N).max()))
        if self.eps * kmax >= 1:
            raise FoldError(f"eps = {self.eps} exceeds the fold bound {1 / kmax:.4g}")

    @property
    def s(self) -> np.ndarray:
        return self.surface.sample(self.ns)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.ntheta) * 2 * math.pi / self.ntheta

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.nt)

    @property
    def ds(self) -> float:
        return self.surface.L / (self.ns - 1)

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.ntheta

    @property
    def dt(self) -> float:
        return 2.0 / (self.nt - 1)

    def with_eps(self, eps: float) -> "ShellGrid":
        return ShellGrid(self.surface, eps, self.ns, self.ntheta, self.nt)

    def surface_weights(self) -> np.ndarray:
        """Trapezoid-in-s, rectangle-in-theta weights times a1, shape (ns, 1)."""
        w = np.full(self.ns, self.ds)
        w[0] = w[-1] = 0.5 * self.ds
        return (w * self.surface.a1(self.s) * self.dtheta)[:, None]

    def t_weights(self) -> np.ndarray:
        w = np.full(self.nt, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def stretches(self):
        """(1 - eps t kT, 1 - eps t kN), each of shape (ns, 1, nt)."""
        cd = curvatures(self.surface, self.s)
        t = self.t[None, None, :]
        fT = _stretch(cd.kappa_T[:, None, None], t, self.eps)
        fN = _stretch(cd.kappa_N[:, None, None], t, self.eps)
        return fT, fN

    def jacobian(self) -> np.ndarray:
        """(1 - eps t kT)(1 - eps t kN), shape (ns, 1, nt); dV = eps J a1 ds dtheta dt."""
        fT, fN = self.stretches()
        return fT * fN

    def frame(self):
        S, TH = np.meshgrid(self.s, self.theta, indexing="ij")
        return frame_at(self.surface, S, TH)


def phi_matrix(surf: SurfaceOfRevolution, s, theta, t, eps) -> np.ndarray:
    """Phi = (I + eps t grad_M nu)^{-1} at one or many nodes, shape (..., 3, 3)."""
    cd = curvatures(surf, s)
    fT = _stretch(cd.kappa_T, t, eps)
    fN = _stretch(cd.kappa_N, t, eps)
    f = frame_at(surf, s, theta)

    def outer(a):
        return a[..., :, None] * a[..., None, :]

    return (
        np.asarray(1 / fT)[..., None, None] * outer(f.T)
        + np.asarray(1 / fN)[..., None, None] * outer(f.N)
        + outer(f.nu)
    )


def shape_operator_ambient(surf: SurfaceOfRevolution, s, theta) -> np.ndarray:
    """grad_M nu = -kT TT - kN NN as a 3x3 ambient matrix."""
    cd = curvatures(surf, s)
    f = frame_at(surf, s, theta)
    TT = f.T[..., :, None] * f.T[..., None, :]
    NN = f.N[..., :, None] * f.N[..., None, :]
    return -np.asarray(cd.kappa_T)[..., None, None] * TT - np.asarray(cd.kappa_N)[..., None, None] * NN


@dataclass(frozen=True)
class ShellField:
    """Q_hat at every shell node, shape (ns, ntheta, nt, 3, 3)."""

    grid: ShellGrid
    Q: np.ndarray

    def __post_init__(self):
        g = self.grid
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (g.ns, g.ntheta, g.nt, 3, 3):
            raise InvalidInputError(f"Q must have shape {(g.ns, g.ntheta, g.nt, 3, 3)}")
        object.__setattr__(self, "Q", Q)

    @classmethod
    def from_function(cls, grid: ShellGrid, fn) -> "ShellField":
        """Sample ``fn(s, theta, t) -> (..., 3, 3)`` on the grid."""
        S, TH, T = np.meshgrid(grid.s, grid.theta, grid.t, indexing="ij")
        return cls(grid, np.asarray(fn(S, TH, T), dtype=float))


@dataclass(frozen=True)
class SurfaceField:
    """A tensor field Q0 on the surface grid (ns, ntheta, 3, 3)."""

    surface: SurfaceOfRevolution
    ns: int
    ntheta: int
    Q: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return self.surface.sample(self.ns)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.ntheta) * 2 * math.pi / self.ntheta

    @classmethod
    def from_director_angle(cls, surf, ns, ntheta, psi_fn, rho=1.0, beta=-1.0 / 3.0):
        """Anchoring-compatible Q0 with p = rho (cos 2 psi, sin 2 psi) in the surface frame."""
        s = surf.sample(ns)
        th = np.arange(ntheta) * 2 * math.pi / ntheta
        S, TH = np.meshgrid(s, th, indexing="ij")
        psi = np.broadcast_to(psi_fn(S, TH), S.shape)
        f = frame_at(surf, S, TH)
        Q = assemble_p_field(rho * np.cos(2 * psi), rho * np.sin(2 * psi), beta, f.T, f.N, f.nu)
        return cls(surf, ns, ntheta, Q)


def _d_s(A, ds, axis=0):
    return np.gradient(A, ds, axis=axis, edge_order=2)


def _d_theta(A, dth, axis=1):
    return (np.roll(A, -1, axis=axis) - np.roll(A, 1, axis=axis)) / (2 * dth)


def surface_gradient_field(Q0: SurfaceField) -> np.ndarray:
    """Discrete grad_M Q0 with layout g[..., i, j, k] = d_k Q_ij, shape (ns, ntheta, 3, 3, 3)."""
    surf = Q0.surface
    s = Q0.s
    ds = surf.L / (Q0.ns - 1)
    Qs = _d_s(Q0.Q, ds)
    Qt = _d_theta(Q0.Q, 2 * math.pi / Q0.ntheta)
    S, TH = np.meshgrid(s, Q0.theta, indexing="ij")
    f = frame_at(surf, S, TH)
    a1 = surf.a1(s)[:, None]
    return Qs[..., None] * f.T[:, :, None, None, :] + (Qt / a1[..., None, None])[..., None] * f.N[:, :, None, None, :]


def full_gradient(field_: ShellField) -> np.ndarray:
    """Ambient gradient at every node, shape (ns, ntheta, nt, 3, 3, 3)."""
    g = field_.grid
    Q = field_.Q
    Qs = _d_s(Q, g.ds, axis=0)
    Qth = _d_theta(Q, g.dtheta, axis=1)
    Qt = np.gradient(Q, g.dt, axis=2, edge_order=2)
    fT, fN = g.stretches()
    a1 = g.surface.a1(g.s)[:, None, None]
    fr = g.frame()
    T = fr.T[:, :, None, None, None, :]
    N = fr.N[:, :, None, None, None, :]
    nu = fr.nu[:, :, None, None, None, :]
    ex = (..., None, None)
    out = (Qs / fT[ex])[..., None] * T
    out = out + (Qth / (a1 * fN)[ex])[..., None] * N
    if g.eps > 0:
        out = out + (Qt / g.eps)[..., None] * nu
    return out


def face_terms(field_: ShellField, params: FilmParams) -> tuple[float, float]:
    """(int f_s0, int f_s1) over both faces with the exact face area elements."""
    g = field_.grid
    J = g.jacobian()
    w = g.surface_weights()
    fr = g.frame()
    s0 = s1 = 0.0
    for idx in (0, -1):
        a, b = f_s_split(field_.Q[:, :, idx], fr.nu, params.anchoring)
        Jf = J[:, :, idx]
        s0 += float(np.sum(a * Jf * w))
        s1 += float(np.sum(b * Jf * w))
    return s0, s1


def F_eps(field_: ShellField, params: FilmParams) -> float:
    """Rescaled 3D energy of a shell field."""
    g = field_.grid
    if g.eps <= 0:
        raise InvalidInputError("F_eps needs eps > 0")
    G = full_gradient(field_)
    dens = f_e(G, params.elastic) + f_ldg(field_.Q, params.ldg) / params.delta**2
    J = g.jacobian()
    vol = np.sum(dens * J * g.t_weights()[None, None, :], axis=2)
    volume = float(np.sum(vol * g.surface_weights()))
    s0, s1 = face_terms(field_, params)
    # f_s = f_s0 + eps f_s1 on each face, divided by eps
    return volume + s0 / g.eps + s1


def check_admissible(Q0: SurfaceField, params: FilmParams) -> None:
    S, TH = np.meshgrid(Q0.s, Q0.theta, indexing="ij")
    nu = frame_at(Q0.surface, S, TH).nu
    s0, _ = f_s_split(Q0.Q, nu, params.anchoring)
    worst = float(np.max(s0))
    if worst > ADMISSIBLE_TOL:
        raise AdmissibilityError(f"leading-order anchoring violated: max residual {worst:.3g}")


def remnant_field(Q0: SurfaceField, params: FilmParams) -> np.ndarray:
    """G_bar at every surface node from the discrete surface gradient of Q0."""
    g = surface_gradient_field(Q0)
    S, TH = np.meshgrid(Q0.s, Q0.theta, indexing="ij")
    nu = frame_at(Q0.surface, S, TH).nu
    return closed_form_G_arrays(g, nu, params.elastic)


def build_recovery(Q0: SurfaceField, params: FilmParams, grid: ShellGrid) -> ShellField:
    """Q_hat(x, t) = Q0(x) + eps t G_bar(x)."""
    if (grid.ns, grid.ntheta) != (Q0.ns, Q0.ntheta) or grid.surface is not Q0.surface:
        raise InvalidInputError("shell grid must sit over the surface grid of Q0")
    check_admissible(Q0, params)
    Gb = remnant_field(Q0, params)
    t = grid.t[None, None, :, None, None]
    Q = Q0.Q[:, :, None] + grid.eps * t * Gb[:, :, None]
    return ShellField(grid, Q)


def limit_energy(Q0: SurfaceField, params: FilmParams) -> float:
    """2 int_M (f_e0 + delta^-2 f_LdG + f_s1) dA.

    The factor 2 is the length of the t-interval; the anchoring term then
    appears as 2 f_s1, the form used in the surface limit.
    """
    g = surface_gradient_field(Q0)
    S, TH = np.meshgrid(Q0.s, Q0.theta, indexing="ij")
    nu = frame_at(Q0.surface, S, TH).nu
    _, fs1 = f_s_split(Q0.Q, nu, params.anchoring)
    dens = f_e0_field(g, nu, params.elastic) + f_ldg(Q0.Q, params.ldg) / params.delta**2 + fs1
    w = np.full(Q0.ns, Q0.surface.L / (Q0.ns - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    w = (w * Q0.surface.a1(Q0.s) * 2 * math.pi / Q0.ntheta)[:, None]
    return 2.0 * float(np.sum(dens * w))


@dataclass(frozen=True)
class RateResult:
    eps: np.ndarray
    F_eps: np.ndarray
    F0: float
    gap: np.ndarray
    order: float
    monotone: bool
    used: np.ndarray

    def rows(self):
        for i, e in enumerate(self.eps):
            last = i == len(self.eps) - 1
            yield {
                "eps": float(e),
                "F_eps": float(self.F_eps[i]),
                "F0": self.F0,
                "gap": float(self.gap[i]),
                "fitted_order": self.order if last else "",
            }


def fit_order(eps, gap) -> float:
    """Slope of log(gap) against log(eps) by least squares."""
    return float(np.polyfit(np.log(eps), np.log(gap), 1)[0])


def gamma_rate(
    Q0: SurfaceField,
    params: FilmParams,
    eps_list,
    nt: int = 16,
    floor: float | None = None,
) -> RateResult:
    """Energies of the recovery fields and the fitted rate of F_eps -> F_0.

    Gaps below ``floor`` (default: 1e-12 |F0|) are treated as quadrature
    noise and left out of the fit.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 2 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise InvalidInputError("eps_list must be positive and strictly decreasing")
    bound = fold_bound(Q0.surface)
    if eps[0] >= bound:
        raise FoldError(f"eps = {eps[0]} exceeds the fold bound {bound:.4g}")
    F0 = limit_energy(Q0, params)
    vals = []
    for e in eps:
        grid = ShellGrid(Q0.surface, float(e), Q0.ns, Q0.ntheta, nt)
        vals.append(F_eps(build_recovery(Q0, params, grid), params))
    vals = np.asarray(vals)
    gap = np.abs(vals - F0)
    floor = 1e-12 * max(1.0, abs(F0)) if floor is None else floor
    used = gap > floor
    order = fit_order(eps[used], gap[used]) if used.sum() >= 2 else math.nan
    valid = gap[used]
    monotone = bool(np.all(np.diff(valid) < 0))
    return RateResult(eps, vals, F0, gap, order, monotone, used)


def write_rate_csv(path, res: RateResult) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["eps", "F_eps", "F0", "gap", "fitted_order"])
        w.writeheader()
        for row in res.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_rate_json(path, res: RateResult, extra: dict | None = None) -> None:
    rep = {
        "F0": res.F0,
        "fitted_order": res.order,
        "monotone": res.monotone,
        "n_used": int(res.used.sum()),
        **(extra or {}),
    }
    Path(path).write_text(json.dumps(rep, indent=2), encoding="utf-8")
