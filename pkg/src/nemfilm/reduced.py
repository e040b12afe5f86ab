"""Limiting surface energy on a surface of revolution in the p-representation.

An anchoring-compatible tensor is Q = p1 (TT - NN) + p2 (TN + NT) +
(3 beta / 2)(nu nu - I/3). Up to the p-independent term
(9 beta^2 / 4)(kappa_T^2 + kappa_N^2), half the squared surface gradient is

    |p_s|^2 + |p_theta|^2 / a1^2 + 4 cos(phi) / a1^2 (p1 p2_theta - p2 p1_theta)
        + (4 / a1^2 - 3 kappa_N^2 + kappa_T^2) |p|^2 + 3 beta p1 (kappa_N^2 - kappa_T^2).

The discrete energy uses a staggered grid: s-differences live on the
midpoints between rings, theta-differences on the midpoints between spokes,
and pointwise terms use the trapezoid rule in s and the rectangle rule in
the periodic theta direction. All quadratic parts are collected into one
sparse matrix so that energy, gradient and Hessian stay exactly consistent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from nemfilm.elastic import AnchoringParams, LdGParams, df_ldg_p, f_ldg_p, ldg_for_modulus
from nemfilm.errors import InvalidInputError, UndefinedDegreeError
from nemfilm.qtensor import assemble_p_field
from nemfilm.surface import SurfaceOfRevolution, curvatures, frame_at, frame_derivatives

BC_TAGS = ("natural", "fixed")


@dataclass(frozen=True)
class PField:
    """Values p[i, j] = (p1, p2) at s_i = s0 + i ds and theta_j = j dtheta.

    The theta direction is periodic (column Ntheta is column 0). ``bc`` holds
    one tag per s-edge; "fixed" rows are left untouched by the minimizer.
    """

    p: np.ndarray
    s: np.ndarray
    bc: tuple[str, str] = ("natural", "natural")

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if p.ndim != 3 or p.shape[2] != 2 or p.shape[0] != s.size:
            raise InvalidInputError("p must have shape (Ns, Ntheta, 2) matching s")
        if s.size < 3 or p.shape[1] < 4:
            raise InvalidInputError("grid too small")
        if np.ptp(np.diff(s)) > 1e-9 * abs(s[-1] - s[0]):
            raise InvalidInputError("s grid must be uniform")
        if any(b not in BC_TAGS for b in self.bc):
            raise InvalidInputError(f"bc tags must be in {BC_TAGS}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", s)

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape[0], self.p.shape[1]

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.p.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.p.shape[1]) * self.dtheta

    @property
    def director_angle(self) -> np.ndarray:
        return 0.5 * np.arctan2(self.p[..., 1], self.p[..., 0])

    def with_p(self, p) -> "PField":
        return replace(self, p=np.asarray(p, dtype=float).reshape(self.p.shape))

    def rolled(self, shift: int) -> "PField":
        """Rotate the field by ``shift`` grid steps in theta."""
        return self.with_p(np.roll(self.p, shift, axis=1))

    @classmethod
    def from_function(cls, surf: SurfaceOfRevolution, ns: int, ntheta: int, fn, bc=("natural", "natural")):
        """Sample ``fn(s, theta) -> (p1, p2)`` on a uniform grid."""
        s = surf.sample(ns)
        th = np.arange(ntheta) * 2 * math.pi / ntheta
        S, TH = np.meshgrid(s, th, indexing="ij")
        p1, p2 = fn(S, TH)
        p = np.stack(np.broadcast_arrays(p1, p2), axis=-1).astype(float)
        return cls(p, s, tuple(bc))

    @classmethod
    def winding(
        cls,
        surf: SurfaceOfRevolution,
        k: int,
        ns: int = 128,
        ntheta: int = 256,
        rho: float = 1.0,
        noise: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        """p = rho (cos k theta, sin k theta), optionally perturbed."""
        f = cls.from_function(surf, ns, ntheta, lambda s, t: (rho * np.cos(k * t), rho * np.sin(k * t)))
        if noise > 0:
            rng = np.random.default_rng(0) if rng is None else rng
            f = f.with_p(f.p + noise * rng.normal(size=f.p.shape))
        return f


@dataclass(frozen=True)
class ReducedConfig:
    surface: SurfaceOfRevolution
    beta: float = -1.0 / 3.0
    ldg: LdGParams = field(default_factory=lambda: ldg_for_modulus(1.0, -1.0 / 3.0, 1.0))
    anchoring: AnchoringParams | None = None
    gtol: float = 1e-8
    max_iter: int = 1_000_000
    ns: int = 128
    ntheta: int = 256

    def __post_init__(self):
        if not -1 / 3 <= self.beta <= 2 / 3:
            raise InvalidInputError("beta must lie in [-1/3, 2/3]")
        if self.gtol <= 0 or self.max_iter < 1:
            raise InvalidInputError("gtol must be positive and max_iter >= 1")

    @property
    def delta(self) -> float:
        return self.ldg.delta


def _coefficients(surf: SurfaceOfRevolution, s, beta):
    cd = curvatures(surf, s)
    a1 = surf.a1(np.asarray(s, dtype=float))
    kT2, kN2 = cd.kappa_T**2, cd.kappa_N**2
    quad = 4 / a1**2 - 3 * kN2 + kT2
    lin = 3 * beta * (kN2 - kT2)
    cross = 4 * np.cos(surf.phi(np.asarray(s, dtype=float))) / a1**2
    return a1, quad, lin, cross


def density_sr10(p, p_s, p_theta, s, config: ReducedConfig):
    """Pointwise reduced elastic density (geometric constant dropped)."""
    p, p_s, p_theta = (np.asarray(x, dtype=float) for x in (p, p_s, p_theta))
    a1, quad, lin, cross = _coefficients(config.surface, s, config.beta)
    p1, p2 = p[..., 0], p[..., 1]
    return (
        np.sum(p_s**2, axis=-1)
        + np.sum(p_theta**2, axis=-1) / a1**2
        + cross * (p1 * p_theta[..., 1] - p2 * p_theta[..., 0])
        + quad * (p1**2 + p2**2)
        + lin * p1
    )


def geometric_offset(s, surf: SurfaceOfRevolution, beta: float):
    """The p-independent term (9 beta^2 / 4)(kappa_T^2 + kappa_N^2)."""
    cd = curvatures(surf, s)
    return 2.25 * beta**2 * (cd.kappa_T**2 + cd.kappa_N**2)


def density_from_tensor(p, p_s, p_theta, s, theta, surf: SurfaceOfRevolution, beta: float):
    """1/2 (|Q_s|^2 + |Q_theta|^2 / a1^2) from the assembled tensor and frame derivatives."""
    p, p_s, p_theta = (np.asarray(x, dtype=float) for x in (p, p_s, p_theta))
    f = frame_at(surf, s, theta)
    d = frame_derivatives(surf, s, theta)

    def outer(a, b):
        return a[..., :, None] * b[..., None, :]

    def sym(a, b):
        return outer(a, b) + outer(b, a)

    Q1 = outer(f.T, f.T) - outer(f.N, f.N)
    Q2 = sym(f.T, f.N)
    ex = (..., None, None)
    Q_s = (
        p_s[..., 0][ex] * Q1
        + p_s[..., 1][ex] * Q2
        + p[..., 0][ex] * (sym(d["T_s"], f.T) - sym(d["N_s"], f.N))
        + p[..., 1][ex] * (sym(d["T_s"], f.N) + sym(f.T, d["N_s"]))
        + 1.5 * beta * sym(d["nu_s"], f.nu)
    )
    Q_t = (
        p_theta[..., 0][ex] * Q1
        + p_theta[..., 1][ex] * Q2
        + p[..., 0][ex] * (sym(d["T_theta"], f.T) - sym(d["N_theta"], f.N))
        + p[..., 1][ex] * (sym(d["T_theta"], f.N) + sym(f.T, d["N_theta"]))
        + 1.5 * beta * sym(d["nu_theta"], f.nu)
    )
    a1 = surf.a1(np.asarray(s, dtype=float))
    return 0.5 * (np.sum(Q_s**2, axis=(-1, -2)) + np.sum(Q_t**2, axis=(-1, -2)) / a1**2)


def tensor_field(field_: PField, config: ReducedConfig) -> np.ndarray:
    """Assemble Q at every node, shape (Ns, Ntheta, 3, 3)."""
    S, TH = np.meshgrid(field_.s, field_.theta, indexing="ij")
    f = frame_at(config.surface, S, TH)
    return assemble_p_field(field_.p[..., 0], field_.p[..., 1], config.beta, f.T, f.N, f.nu)


class DiscreteEnergy:
    """Staggered-grid energy E(x) = 1/2 x.Hx + b.x + sum w a1 delta^-2 f(|p|^2) + const.

    ``x`` stacks p1 and p2 row-major: x = [p1.ravel(), p2.ravel()].
    """

    def __init__(self, s: np.ndarray, ntheta: int, config: ReducedConfig):
        self.config = config
        surf = config.surface
        s = surf.check_s(s)
        ns = s.size
        self.ns, self.nt = ns, ntheta
        ds = float(s[1] - s[0])
        dth = 2 * math.pi / ntheta
        self.ds, self.dth = ds, dth

        wt = np.full(ns, ds)
        wt[0] = wt[-1] = 0.5 * ds
        a1, quad, lin, cross = _coefficients(surf, s, config.beta)
        # per-node area weight w_i a1_i dtheta (trapezoid in s, rectangle in theta)
        area = np.repeat(wt * a1 * dth, ntheta)
        self.area = area

        n = ns * ntheta
        It = sp.identity(ntheta, format="csr")
        Is = sp.identity(ns, format="csr")
        shift = sp.csr_matrix(np.roll(np.eye(ntheta), 1, axis=1))  # (shift x)_j = x_{j+1}
        Dt = sp.kron(Is, shift - It, format="csr")
        Ds1 = sp.diags([-np.ones(ns - 1), np.ones(ns - 1)], [0, 1], shape=(ns - 1, ns))
        Ds = sp.kron(Ds1, It, format="csr")

        a1_mid = surf.a1(0.5 * (s[1:] + s[:-1]))
        Wds = sp.diags(np.repeat(a1_mid * dth / ds, ntheta))
        Wdt = sp.diags(np.repeat(wt / (a1 * dth), ntheta))
        lap = 2 * (Ds.T @ Wds @ Ds) + 2 * (Dt.T @ Wdt @ Dt)
        diag_quad = sp.diags(2 * area * np.repeat(quad, ntheta))
        block = (lap + diag_quad).tocsr()

        # cross term sum_ij c_i (p1_ij p2_i,j+1 - p2_ij p1_i,j+1) with c_i = w_i a1_i dtheta * cross_i / dtheta
        Cc = sp.diags(np.repeat(wt * a1 * cross, ntheta))
        S = sp.kron(Is, shift, format="csr")
        X = (Cc @ S - S.T @ Cc).tocsr()
        self.H = sp.bmat([[block, X], [X.T, block]], format="csr")
        self.b = np.concatenate([area * np.repeat(lin, ntheta), np.zeros(n)])

        const = 0.0
        if config.anchoring is not None:
            an = config.anchoring
            const = 2 * an.alpha1 * (config.beta - an.beta) ** 2 * area.sum()
        self.const = const
        self.mass = sp.diags(np.concatenate([area, area]))

    def split(self, x):
        n = self.ns * self.nt
        return x[:n], x[n:]

    def _bulk(self, x):
        p1, p2 = self.split(x)
        rho2 = p1 * p1 + p2 * p2
        w = self.area / self.config.delta**2
        return p1, p2, rho2, w

    def energy(self, x) -> float:
        p1, p2, rho2, w = self._bulk(x)
        bulk = np.sum(w * f_ldg_p(rho2, self.config.beta, self.config.ldg))
        return float(0.5 * x @ (self.H @ x) + self.b @ x + bulk + self.const)

    def energy_change(self, x, d) -> float:
        """E(x + d) - E(x) in difference form, free of cancellation near a minimum."""
        p1, p2, rho2, w = self._bulk(x)
        d1, d2 = self.split(d)
        drho2 = 2 * (p1 * d1 + p2 * d2) + d1 * d1 + d2 * d2
        beta, ldg = self.config.beta, self.config.ldg
        t2 = 2 * rho2 + 1.5 * beta**2
        dt2 = 2 * drho2
        dt3 = -3 * beta * drho2
        dbulk = 2 * ldg.A * dt2 + 4 / 3 * ldg.B * dt3 + dt2 * (2 * t2 + dt2)
        Hd = self.H @ d
        return float((self.H @ x + self.b) @ d + 0.5 * d @ Hd + np.sum(w * dbulk))

    def gradient(self, x) -> np.ndarray:
        p1, p2, rho2, w = self._bulk(x)
        d = 2 * w * df_ldg_p(rho2, self.config.beta, self.config.ldg)
        return self.H @ x + self.b + np.concatenate([d * p1, d * p2])

    def energy_and_gradient(self, x):
        return self.energy(x), self.gradient(x)

    def gradient_density(self, g) -> np.ndarray:
        """Gradient divided by the nodal quadrature weight (a grid-independent scale)."""
        return g / np.concatenate([self.area, self.area])

    def hessian(self, x) -> sp.csr_matrix:
        """Exact sparse Hessian of :meth:`energy`."""
        p1, p2, rho2, w = self._bulk(x)
        fp = df_ldg_p(rho2, self.config.beta, self.config.ldg)
        # d^2 f / d(rho2)^2 = 8, so the local block is 2 f' I + 32 p p^T
        h11 = w * (2 * fp + 32 * p1 * p1)
        h22 = w * (2 * fp + 32 * p2 * p2)
        h12 = w * 32 * p1 * p2
        local = sp.bmat([[sp.diags(h11), sp.diags(h12)], [sp.diags(h12), sp.diags(h22)]])
        return (self.H + local).tocsr()


def _pack(field_: PField) -> np.ndarray:
    return np.concatenate([field_.p[..., 0].ravel(), field_.p[..., 1].ravel()])


def _unpack(x, field_: PField) -> PField:
    n = x.size // 2
    return field_.with_p(np.stack([x[:n], x[n:]], axis=-1))


def total_energy(field_: PField, config: ReducedConfig) -> float:
    return DiscreteEnergy(field_.s, field_.shape[1], config).energy(_pack(field_))


def energy_gradient(field_: PField, config: ReducedConfig) -> np.ndarray:
    """Exact gradient of :func:`total_energy`, shape (Ns, Ntheta, 2)."""
    g = DiscreteEnergy(field_.s, field_.shape[1], config).gradient(_pack(field_))
    n = g.size // 2
    return np.stack([g[:n], g[n:]], axis=-1).reshape(field_.p.shape)


@dataclass
class MinimizeReport:
    n_iters: int
    converged: bool
    grad_sup: float
    energies: list[float]
    status: str

    @property
    def monotone(self) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[:-1]))))

    def to_dict(self) -> dict:
        return {
            "n_iters": self.n_iters,
            "converged": self.converged,
            "grad_sup": self.grad_sup,
            "final_energy": self.energies[-1],
            "status": self.status,
        }


def gradient_flow_minimize(initial: PField, config: ReducedConfig):
    """Descent with Armijo backtracking, preconditioned by the shifted Hessian.

    Each step solves (H + tau M) d = -g where H is the exact sparse Hessian,
    M is the lumped mass matrix and tau >= 0 is raised until d is a descent
    direction and a step is accepted.
    Steps are accepted only if the energy decreases (Armijo condition), so
    the recorded energies are non-increasing. Rows with a "fixed" boundary
    tag are excluded from the update.

    Returns
    -------
    (PField, float, MinimizeReport)
    """
    en = DiscreteEnergy(initial.s, initial.shape[1], config)
    ns, nt = initial.shape
    free = np.ones((ns, nt), dtype=bool)
    if initial.bc[0] == "fixed":
        free[0] = False
    if initial.bc[1] == "fixed":
        free[-1] = False
    free = np.concatenate([free.ravel(), free.ravel()])
    idx = np.flatnonzero(free)

    x = _pack(initial)
    E, g = en.energy_and_gradient(x)
    energies = [E]
    tau = 1e-8
    status = "max_iter"
    it = 0
    gsup = float(np.abs(en.gradient_density(g)[idx]).max())
    for it in range(1, config.max_iter + 1):
        if gsup <= config.gtol:
            it -= 1
            status = "converged"
            break
        K = en.hessian(x)
        gf = g[idx]
        accepted = False
        for _ in range(30):
            Kf = (K + tau * en.mass)[idx][:, idx].tocsc()
            try:
                d = -spla.splu(Kf).solve(gf)
            except RuntimeError:
                tau = max(10 * tau, 1e-6)
                continue
            slope = float(gf @ d)
            if not np.all(np.isfinite(d)) or slope >= -1e-14 * np.linalg.norm(gf) * np.linalg.norm(d):
                tau = max(10 * tau, 1e-6)
                continue
            alpha = 1.0
            while alpha > 1e-10:
                step = np.zeros_like(x)
                step[idx] = alpha * d
                dE = en.energy_change(x, step)
                if dE <= 1e-4 * alpha * slope:
                    xn, En = x + step, E + dE
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            tau = max(10 * tau, 1e-6)
        if not accepted:
            status = "line_search_failed"
            break
        tau = max(tau / 10, 1e-8)
        x, E = xn, En
        g = en.gradient(x)
        energies.append(E)
        gsup = float(np.abs(en.gradient_density(g)[idx]).max())
    else:
        status = "converged" if gsup <= config.gtol else "max_iter"
    result = _unpack(x, initial)
    report = MinimizeReport(it, status == "converged", gsup, energies, status)
    return result, en.energy(x), report


def winding_number(field_: PField, s_index: int, wtol: float = 1e-3) -> int:
    """Degree of p around the theta-circle at ring ``s_index``."""
    p = field_.p[s_index]
    if np.hypot(p[:, 0], p[:, 1]).min() < wtol:
        raise UndefinedDegreeError(f"|p| < {wtol} on ring {s_index}")
    ang = np.arctan2(p[:, 1], p[:, 0])
    inc = np.diff(np.append(ang, ang[0]))
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    return int(round(inc.sum() / (2 * math.pi)))


def write_field_csv(path, field_: PField) -> None:
    """Columns s, theta, p1, p2, psi (director angle), one row per node."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "theta", "p1", "p2", "psi"])
        psi = field_.director_angle
        for i, s in enumerate(field_.s):
            for j, th in enumerate(field_.theta):
                p1, p2 = field_.p[i, j]
                w.writerow([repr(float(s)), repr(float(th)), repr(float(p1)), repr(float(p2)), repr(float(psi[i, j]))])


def read_field_csv(path, bc=("natural", "natural")) -> PField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    s = np.unique(rows[:, 0])
    nt = rows.shape[0] // s.size
    p = rows[:, 2:4].reshape(s.size, nt, 2)
    return PField(p, s, tuple(bc))


def write_metadata(path, config: ReducedConfig, report: MinimizeReport, extra: dict | None = None) -> None:
    meta = {
        "surface": config.surface.name,
        "surface_params": config.surface.params,
        "beta": config.beta,
        "delta": config.delta,
        "ldg": {"A": config.ldg.A, "B": config.ldg.B, "offset": config.ldg.offset},
        "gtol": config.gtol,
        "max_iter": config.max_iter,
        **report.to_dict(),
        **(extra or {}),
    }
    Path(path).write_text(json.dumps(meta, indent=2), encoding="utf-8")
