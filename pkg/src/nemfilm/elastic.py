"""Non-dimensional energy densities and model parameters.

Gradient arrays follow the layout ``g[..., i, j, k] = d_k Q_ij``: the first
two indices are the tensor entry, the last one the spatial direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nemfilm.errors import InvalidInputError, NoNematicMinimumError
from nemfilm.qtensor import I3, UNIT_TOL, traceless_basis


@dataclass(frozen=True)
class ElasticConstants:
    """Ratios M2 = L2/L1 and M3 = L3/L1."""

    M2: float = 0.0
    M3: float = 0.0

    @property
    def zeta(self) -> float:
        return self.M2 + self.M3

    @property
    def coercive(self) -> bool:
        return in_coercive_region(self.M2, self.M3)


def in_coercive_region(M2, M3):
    """-1 < M3 < 2 and M2 > -3/5 - M3/10 (elementwise for arrays)."""
    M2 = np.asarray(M2, dtype=float)
    M3 = np.asarray(M3, dtype=float)
    ok = (M3 > -1.0) & (M3 < 2.0) & (M2 > -0.6 - 0.1 * M3)
    return bool(ok) if ok.ndim == 0 else ok


def _restricted_potential(S, A, B):
    """Bulk potential on uniaxial states S (n n - I/3)."""
    return 4 * A * S**2 / 3 + 8 * B * S**3 / 27 + 4 * S**4 / 9


def _nematic_roots(A, B):
    disc = B * B - 24 * A
    if disc < 0:
        raise NoNematicMinimumError(f"B^2 - 24A = {disc:.3g} < 0: no nematic minimum")
    r = math.sqrt(disc)
    return (-B + r) / 4, (-B - r) / 4


@dataclass(frozen=True)
class LdGParams:
    """Non-dimensional bulk potential 2A tr Q^2 + 4/3 B tr Q^3 + (tr Q^2)^2.

    ``offset`` is filled in automatically so that the minimum over uniaxial
    states is zero.
    """

    A: float = -1.0
    B: float = 0.0
    delta: float = 1.0
    offset: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidInputError("delta must be positive")
        if self.offset is None:
            try:
                S = uniaxial_stationary_S(self)
                fmin = min(0.0, _restricted_potential(S, self.A, self.B))
            except NoNematicMinimumError:
                fmin = 0.0
            object.__setattr__(self, "offset", -fmin)


def uniaxial_stationary_S(p: LdGParams) -> float:
    """Nontrivial root of 2S^2 + B S + 3A = 0 with the lower potential.

    For B <= 0 this is (-B + sqrt(B^2 - 24A)) / 4.
    """
    roots = _nematic_roots(p.A, p.B)
    return min(roots, key=lambda S: (_restricted_potential(S, p.A, p.B), -S))


@dataclass(frozen=True)
class AnchoringParams:
    """Weak anchoring weights split by order in the film thickness."""

    alpha0: float = 0.0
    alpha1: float = 0.0
    gamma0: float = 0.0
    gamma1: float = 0.0
    beta: float = -1.0 / 3.0

    def __post_init__(self):
        w = (self.alpha0, self.alpha1, self.gamma0, self.gamma1)
        if min(w) < 0:
            raise InvalidInputError("anchoring weights must be nonnegative")
        if self.alpha0 * self.alpha1 != 0 or self.gamma0 * self.gamma1 != 0:
            raise InvalidInputError("need alpha0*alpha1 = 0 and gamma0*gamma1 = 0")
        if not -1 / 3 <= self.beta <= 2 / 3:
            raise InvalidInputError("beta must lie in [-1/3, 2/3]")


def check_gradq(g, tol: float = 1e-12) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape[-3:] != (3, 3, 3):
        raise InvalidInputError("GradQ must have trailing shape (3, 3, 3)")
    asym = np.abs(g - np.swapaxes(g, -3, -2)).max()
    tr = np.abs(np.einsum("...iik->...k", g)).max()
    if asym > tol or tr > tol:
        raise InvalidInputError("GradQ must be symmetric traceless in (i, j)")
    return g


def f_e(g, c: ElasticConstants):
    """1/2 sum_j {|grad Q_j|^2 + M2 (div Q_j)^2 + M3 grad Q_j . grad Q_j^T}.

    Accepts ``g`` of shape (..., 3, 3, 3) and returns an array of shape (...).
    """
    g = np.asarray(g, dtype=float)
    sq = np.einsum("...ijk,...ijk->...", g, g)
    div = np.einsum("...iji->...j", g)
    dd = np.einsum("...j,...j->...", div, div)
    # column j: (grad Q_j)_{ik} = d_k Q_ij; contract with its transpose
    tt = np.einsum("...ijk,...kji->...", g, g)
    return 0.5 * (sq + c.M2 * dd + c.M3 * tt)


def tr2(Q):
    Q = np.asarray(Q, dtype=float)
    return np.einsum("...ij,...ji->...", Q, Q)


def tr3(Q):
    Q = np.asarray(Q, dtype=float)
    return np.einsum("...ij,...jk,...ki->...", Q, Q, Q)


def f_ldg(Q, p: LdGParams):
    """Bulk potential including the nonnegativity offset."""
    t2 = tr2(Q)
    return 2 * p.A * t2 + 4 / 3 * p.B * tr3(Q) + t2 * t2 + p.offset


def f_ldg_p(rho2, beta, p: LdGParams):
    """Bulk potential of an anchoring-compatible tensor given |p|^2.

    The eigenvalues are +-|p| - beta/2 and beta, hence
    tr Q^2 = 2|p|^2 + 3 beta^2 / 2 and tr Q^3 = -3 beta |p|^2 + 3 beta^3 / 4.
    """
    t2 = 2 * rho2 + 1.5 * beta**2
    t3 = -3 * beta * rho2 + 0.75 * beta**3
    return 2 * p.A * t2 + 4 / 3 * p.B * t3 + t2 * t2 + p.offset


def df_ldg_p(rho2, beta, p: LdGParams):
    """Derivative of :func:`f_ldg_p` with respect to |p|^2."""
    t2 = 2 * rho2 + 1.5 * beta**2
    return 4 * p.A - 4 * p.B * beta + 4 * t2


def ldg_for_modulus(rho: float, beta: float, delta: float, B: float = 0.0) -> LdGParams:
    """Parameters whose potential, restricted to Q nu = beta nu, is minimal at |p| = rho."""
    A = B * beta - (2 * rho**2 + 1.5 * beta**2)
    return LdGParams(A=A, B=B, delta=delta)


def _unit_nu(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1] != 3 or np.abs(np.linalg.norm(nu, axis=-1) - 1.0).max() > UNIT_TOL:
        raise InvalidInputError("nu must be a unit vector")
    return nu


def f_s_split(Q, nu, a: AnchoringParams):
    """Return (f_s0, f_s1), the leading and first-order anchoring densities."""
    nu = _unit_nu(nu)
    Q = np.asarray(Q, dtype=float)
    Qnu = np.einsum("...ij,...j->...i", Q, nu)
    normal = np.einsum("...i,...i->...", Qnu, nu)
    tang = Qnu - normal[..., None] * nu
    dev = (normal - a.beta) ** 2
    shear = np.einsum("...i,...i->...", tang, tang)
    return a.alpha0 * dev + a.gamma0 * shear, a.alpha1 * dev + a.gamma1 * shear


def f_s(Q, nu, a: AnchoringParams, eps: float):
    s0, s1 = f_s_split(Q, nu, a)
    return s0 + eps * s1


def gradq_basis() -> np.ndarray:
    """Orthonormal basis (15, 3, 3, 3) of gradients symmetric traceless in (i, j)."""
    E = traceless_basis()
    out = np.zeros((15, 3, 3, 3))
    for a in range(5):
        for k in range(3):
            out[3 * a + k, :, :, k] = E[a]
    return out


def elastic_form_matrix(c: ElasticConstants) -> np.ndarray:
    """15x15 matrix of g -> 2 f_e(g) in the basis of :func:`gradq_basis`."""
    B = gradq_basis()
    fe = f_e(B, c)
    pair = f_e(B[:, None] + B[None, :], c)
    return pair - fe[:, None] - fe[None, :]


def coercivity_margin(c: ElasticConstants) -> float:
    """Smallest eigenvalue of the elastic quadratic form on admissible gradients."""
    return float(np.linalg.eigvalsh(elastic_form_matrix(c))[0])


@dataclass(frozen=True)
class Nondimensional:
    elastic: ElasticConstants
    ldg: LdGParams
    anchoring: AnchoringParams
    epsilon: float


def nondimensionalize(
    L1, L2, L3, a, b, c, alpha, gamma, D, h, beta=-1.0 / 3.0, anchoring_order=0
) -> Nondimensional:
    """Scale dimensional constants by L1, c and the surface diameter D.

    ``anchoring_order`` selects whether the scaled anchoring strengths enter
    at leading order (0) or at first order in the aspect ratio (1).
    """
    if L1 <= 0 or c <= 0 or D <= 0:
        raise InvalidInputError("L1, c and D must be positive")
    if not 0 < h < D:
        raise InvalidInputError("need 0 < h < D")
    ec = ElasticConstants(L2 / L1, L3 / L1)
    ldg = LdGParams(A=a / c, B=b / c, delta=math.sqrt(2 * L1 / (c * D * D)))
    at, gt = alpha * D / L1, gamma * D / L1
    if anchoring_order == 0:
        an = AnchoringParams(alpha0=at, gamma0=gt, beta=beta)
    elif anchoring_order == 1:
        an = AnchoringParams(alpha1=at, gamma1=gt, beta=beta)
    else:
        raise InvalidInputError("anchoring_order must be 0 or 1")
    return Nondimensional(ec, ldg, an, h / D)


__all__ = [
    "AnchoringParams",
    "ElasticConstants",
    "LdGParams",
    "Nondimensional",
    "check_gradq",
    "coercivity_margin",
    "df_ldg_p",
    "elastic_form_matrix",
    "f_e",
    "f_ldg",
    "f_ldg_p",
    "f_s",
    "f_s_split",
    "gradq_basis",
    "in_coercive_region",
    "ldg_for_modulus",
    "nondimensionalize",
    "tr2",
    "tr3",
]
