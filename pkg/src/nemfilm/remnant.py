"""Minimization of the normal remnant of the gradient.

For a tangential gradient ``g`` (``g[i, j, k] nu_k = 0``) the reduced elastic
density is

    f_e0(g, nu) = min_{G symmetric traceless} f_e(G (x) nu + g)
                = f_e(g) + min_G phi[G],
    phi[G] = U . G + |G|^2 / 2 + zeta / 2 |G nu|^2,

with ``U_i = M2 (div_M Q_i) nu + M3 (grad_M Q_i)^T nu`` the i-th column of U
and ``zeta = M2 + M3``. The closed-form minimizer and minimum are
implemented in :func:`closed_form_G` and :func:`phi_min`; the brute-force
route in :func:`brute_force_G` never touches U or zeta and solves a 5x5
linear system assembled from :func:`nemfilm.elastic.f_e` alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from nemfilm.elastic import ElasticConstants, f_e
from nemfilm.errors import IllPosedError, InvalidInputError
from nemfilm.qtensor import I3, project_qtensor, traceless_basis

NU_WARN = 1e-10
NU_REJECT = 1e-6


def _normalize_nu(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    dev = np.abs(np.linalg.norm(nu, axis=-1) - 1.0).max()
    if dev > NU_REJECT:
        raise InvalidInputError(f"|nu| deviates from 1 by {dev:.2e}")
    if dev > NU_WARN:
        warnings.warn(f"normalizing nu (|nu| - 1 = {dev:.2e})", stacklevel=3)
    return nu / np.linalg.norm(nu, axis=-1, keepdims=True)


@dataclass(frozen=True)
class RemnantInput:
    """Tangential gradient data at one point of the surface.

    ``gradM_Q[i, j, k]`` is the k-th ambient component of the surface
    gradient of Q_ij.
    """

    gradM_Q: np.ndarray
    nu: np.ndarray
    constants: ElasticConstants

    def __post_init__(self):
        g = np.asarray(self.gradM_Q, dtype=float)
        if g.shape != (3, 3, 3):
            raise InvalidInputError("gradM_Q must have shape (3, 3, 3)")
        nu = _normalize_nu(self.nu)
        scale = max(1.0, np.abs(g).max())
        if np.abs(g - g.transpose(1, 0, 2)).max() > 1e-12 * scale:
            raise InvalidInputError("gradM_Q must be symmetric in (i, j)")
        if np.abs(np.einsum("iik->k", g)).max() > 1e-12 * scale:
            raise InvalidInputError("gradM_Q must be traceless in (i, j)")
        if np.abs(g @ nu).max() > 1e-12 * scale:
            raise InvalidInputError("gradM_Q must annihilate nu (tangential gradient)")
        object.__setattr__(self, "gradM_Q", g)
        object.__setattr__(self, "nu", nu)

    @property
    def div(self) -> np.ndarray:
        return surface_div(self.gradM_Q)

    def aux(self) -> "AuxU":
        return AuxU.build(self.gradM_Q, self.nu, self.constants)


@dataclass(frozen=True)
class AuxU:
    U: np.ndarray
    zeta: float

    @property
    def DU(self) -> np.ndarray:
        return 0.5 * (self.U + np.swapaxes(self.U, -1, -2))

    @classmethod
    def build(cls, g, nu, c: ElasticConstants) -> "AuxU":
        return cls(remnant_U(g, nu, c), c.zeta)


def surface_div(g) -> np.ndarray:
    """(div_M Q)_i = div_M Q_i = sum_j d_j Q_ji."""
    return np.einsum("...jij->...i", np.asarray(g, dtype=float))


def remnant_U(g, nu, c: ElasticConstants) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    nu = np.asarray(nu, dtype=float)
    div = surface_div(g)
    # column i: M2 div_i nu + M3 (grad_M Q_i)^T nu, with (grad_M Q_i)_{jk} = g[j, i, k]
    t3 = np.einsum("...jik,...j->...ki", g, nu)
    return c.M2 * nu[..., :, None] * div[..., None, :] + c.M3 * t3


def random_tangential_gradient(rng: np.random.Generator, nu, scale: float = 1.0) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    A = rng.normal(scale=scale, size=(3, 3, 3))
    A = 0.5 * (A + A.transpose(1, 0, 2))
    A -= np.einsum("iik->k", A)[None, None, :] * I3[:, :, None] / 3.0
    P = I3 - np.outer(nu, nu)
    return A @ P


def random_input(rng: np.random.Generator, constants: ElasticConstants, scale=1.0) -> RemnantInput:
    nu = rng.normal(size=3)
    nu /= np.linalg.norm(nu)
    return RemnantInput(random_tangential_gradient(rng, nu, scale), nu, constants)


def _check_denominators(zeta):
    zeta = np.asarray(zeta, dtype=float)
    if np.any(np.abs(zeta + 2) < 1e-12) or np.any(np.abs(2 * zeta + 3) < 1e-12):
        raise IllPosedError("degenerate denominator: zeta + 2 or 2 zeta + 3 vanishes")
    if np.any(zeta <= -1.5):
        raise IllPosedError("need zeta = M2 + M3 > -3/2")


def _check_coercive(c: ElasticConstants):
    if not c.coercive:
        raise IllPosedError(f"(M2, M3) = ({c.M2}, {c.M3}) outside coercive region")


def closed_form_G_arrays(g, nu, c: ElasticConstants) -> np.ndarray:
    """Vectorized closed-form minimizer for g of shape (..., 3, 3, 3)."""
    z = c.zeta
    _check_denominators(z)
    nu = np.asarray(nu, dtype=float)
    U = remnant_U(g, nu, c)
    D = 0.5 * (U + np.swapaxes(U, -1, -2))
    Dn = np.einsum("...ij,...j->...i", D, nu)
    unn = np.einsum("...i,...ij,...j->...", nu, U, nu)
    trU = np.trace(U, axis1=-2, axis2=-1)
    nn = nu[..., :, None] * nu[..., None, :]
    sym = nu[..., :, None] * Dn[..., None, :]
    sym = sym + np.swapaxes(sym, -1, -2)
    c_nn = -z * (z * unn + (z + 2) * trU) / ((z + 2) * (2 * z + 3))
    c_id = -(z * unn - (z + 1) * trU) / (2 * z + 3)
    return -D + z / (z + 2) * sym + c_nn[..., None, None] * nn + c_id[..., None, None] * I3


def closed_form_G(inp: RemnantInput) -> np.ndarray:
    return closed_form_G_arrays(inp.gradM_Q, inp.nu, inp.constants)


def phi(G, U, nu, zeta):
    """phi[G] = U . G + |G|^2 / 2 + zeta / 2 |G nu|^2."""
    Gn = np.einsum("...ij,...j->...i", G, nu)
    return (
        np.einsum("...ij,...ij->...", U, G)
        + 0.5 * np.einsum("...ij,...ij->...", G, G)
        + 0.5 * zeta * np.einsum("...i,...i->...", Gn, Gn)
    )


def phi_min(U, nu, zeta):
    """Minimum of phi over symmetric traceless G, in closed form."""
    _check_denominators(zeta)
    z = zeta
    D = 0.5 * (U + np.swapaxes(U, -1, -2))
    Dn = np.einsum("...ij,...j->...i", D, nu)
    unn = np.einsum("...i,...ij,...j->...", nu, U, nu)
    trU = np.trace(U, axis1=-2, axis2=-1)
    return (
        -0.5 * np.einsum("...ij,...ij->...", D, D)
        + z / (z + 2) * np.einsum("...i,...i->...", Dn, Dn)
        - z**2 / (2 * (z + 2) * (2 * z + 3)) * unn**2
        - z / (2 * z + 3) * unn * trU
        + (z + 1) / (2 * (2 * z + 3)) * trU**2
    )


def stationarity_residual(G, inp: RemnantInput) -> float:
    """Norm of the gradient of phi at G projected onto symmetric traceless tensors."""
    aux = inp.aux()
    Gn = G @ inp.nu
    grad = aux.U + G + 0.5 * aux.zeta * (np.outer(Gn, inp.nu) + np.outer(inp.nu, Gn))
    return float(np.linalg.norm(project_qtensor(grad)))


def brute_force_G(inp: RemnantInput) -> tuple[np.ndarray, float]:
    """Minimize f_e(G (x) nu + g) over a fixed orthonormal basis of traceless tensors.

    The objective is quadratic in the five coordinates c of G; its Hessian
    and linear term are read off from values of f_e by polarization, and the
    normal equations are solved directly. Returns the minimizer and the
    minimum of phi (that is, f_e at the minimizer minus f_e(g)).
    """
    c = inp.constants
    _check_coercive(c)
    E = traceless_basis()
    g = inp.gradM_Q
    lifted = np.einsum("aij,k->aijk", E, inp.nu)
    fe_a = f_e(lifted, c)
    H = f_e(lifted[:, None] + lifted[None, :], c) - fe_a[:, None] - fe_a[None, :]
    f0 = float(f_e(g, c))
    b = f_e(lifted + g, c) - fe_a - f0
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise IllPosedError("remnant quadratic form is not positive definite") from exc
    coef = -np.linalg.solve(L.T, np.linalg.solve(L, b))
    G = np.einsum("a,aij->ij", coef, E)
    return G, float(0.5 * b @ coef)


def f_e0_without_m3(g, nu, M2: float):
    """Reduced density for M3 = 0:

    1/2 {|g|^2 + 2 M2/(M2+2) |div|^2 - M2^2/((M2+2)(2 M2+3)) (nu . div)^2}.
    """
    if not M2 > -0.6:
        raise IllPosedError("need M2 > -3/5")
    div = surface_div(g)
    nd = np.einsum("...i,...i->...", nu, div)
    sq = np.einsum("...ijk,...ijk->...", g, g)
    dd = np.einsum("...i,...i->...", div, div)
    return 0.5 * (sq + 2 * M2 / (M2 + 2) * dd - M2**2 / ((M2 + 2) * (2 * M2 + 3)) * nd**2)


def f_e0_expanded(g, nu, c: ElasticConstants):
    """Reduced density for general (M2, M3), term by term."""
    M2, M3 = c.M2, c.M3
    z = M2 + M3
    g = np.asarray(g, dtype=float)
    nu = np.asarray(nu, dtype=float)
    div = surface_div(g)
    nd = np.einsum("...i,...i->...", nu, div)
    val = 0.5 * np.einsum("...ijk,...ijk->...", g, g)
    val = val + M2 * (M3 + 2) / (2 * (z + 2)) * np.einsum("...i,...i->...", div, div)
    num = (
        (M3**2 + 2 * M3 - 1) * M2**2
        + (2 * M3**2 + 5 * M3 + 4) * M2 * M3
        + (M3**2 + 3 * M3 + 2) * M3**2
    )
    val = val + num / (2 * (z + 2) * (2 * z + 3)) * nd**2
    # grad_M Q_i . (grad_M Q_i)^T summed over i
    tt = np.einsum("...jik,...kij->...", g, g)
    # sum_i nu_i nu . (grad_M Q_i div)
    cross = np.einsum("...i,...j,...jik,...k->...", nu, nu, g, div)
    val = val + 0.5 * (M3 * tt - 2 * M2 * M3 / (z + 2) * cross)
    Gsum = np.einsum("...i,...jik->...jk", nu, g)
    S = Gsum + np.swapaxes(Gsum, -1, -2)
    val = val - M3**2 / 8 * np.einsum("...jk,...jk->...", S, S)
    w = np.einsum("...i,...jik,...j->...k", nu, g, nu)
    return val + M3**2 / 4 * z / (z + 2) * np.einsum("...k,...k->...", w, w)


def f_e0_field(g, nu, c: ElasticConstants):
    """Vectorized reduced density via the closed-form minimum of phi."""
    _check_coercive(c)
    U = remnant_U(g, nu, c)
    return f_e(g, c) + phi_min(U, nu, c.zeta)


def f_e0(inp: RemnantInput, method: str = "closed") -> float:
    """Reduced elastic density.

    ``method``: ``"closed"`` (f_e(g) plus the closed-form minimum of phi),
    ``"brute"`` (5x5 solve), ``"expanded"`` (term-by-term general formula) or
    ``"without_m3"`` (M3 = 0 only).
    """
    c = inp.constants
    _check_coercive(c)
    if method == "closed":
        return float(f_e0_field(inp.gradM_Q, inp.nu, c))
    if method == "brute":
        _, m = brute_force_G(inp)
        return float(f_e(inp.gradM_Q, c)) + m
    if method == "expanded":
        return float(f_e0_expanded(inp.gradM_Q, inp.nu, c))
    if method == "without_m3":
        if c.M3 != 0:
            raise InvalidInputError("without_m3 route requires M3 = 0")
        return float(f_e0_without_m3(inp.gradM_Q, inp.nu, c.M2))
    raise InvalidInputError(f"unknown method {method!r}")
