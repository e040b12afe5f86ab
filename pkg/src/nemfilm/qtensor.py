"""Symmetric traceless order tensors.

A Q-tensor is stored as a plain ``numpy.ndarray`` of shape ``(3, 3)`` (or
``(..., 3, 3)`` for fields). Functions here build, check and decompose such
arrays; the small dataclasses carry derived descriptions (spectrum, uniaxial
parameters, surface-frame coordinates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nemfilm.errors import InvalidInputError, NotRepresentableError

I3 = np.eye(3)

SYM_TOL = 1e-12
UNIT_TOL = 1e-12
FRAME_TOL = 1e-12
EIGVEC_TOL = 1e-8

LAMBDA_MIN = -1.0 / 3.0
LAMBDA_MAX = 2.0 / 3.0


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and matching orthonormal eigenvectors.

    ``vectors[:, i]`` belongs to ``values[i]``; with the customary names,
    ``l``, ``m``, ``n`` are the columns for the smallest, middle and largest
    eigenvalue.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def l(self) -> np.ndarray:  # noqa: E743
        return self.vectors[:, 0]

    @property
    def m(self) -> np.ndarray:
        return self.vectors[:, 1]

    @property
    def n(self) -> np.ndarray:
        return self.vectors[:, 2]

    @property
    def physical(self) -> bool:
        """True iff every eigenvalue lies in [-1/3, 2/3] (up to round-off)."""
        v = self.values
        return bool(np.all((v >= LAMBDA_MIN - EIGVEC_TOL) & (v <= LAMBDA_MAX + EIGVEC_TOL)))

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class UniaxialState:
    S: float
    n: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise InvalidInputError("director must be a unit 3-vector")
        object.__setattr__(self, "n", n)

    def tensor(self) -> np.ndarray:
        return from_uniaxial(self.S, self.n)


@dataclass(frozen=True)
class BiaxialState:
    """Q = S1 (l x l - I/3) + S2 (n x n - I/3) with l orthogonal to n."""

    S1: float
    S2: float
    l: np.ndarray
    n: np.ndarray

    def tensor(self) -> np.ndarray:
        l = _unit(self.l, "l")
        n = _unit(self.n, "n")
        if abs(l @ n) > FRAME_TOL:
            raise InvalidInputError("l and n must be orthogonal")
        return self.S1 * (np.outer(l, l) - I3 / 3) + self.S2 * (np.outer(n, n) - I3 / 3)

    @classmethod
    def from_spectrum(cls, spec: Spectrum) -> "BiaxialState":
        lam1, _, lam3 = spec.values
        return cls(2 * lam1 + lam3, lam1 + 2 * lam3, spec.l, spec.n)


@dataclass(frozen=True)
class PRepresentation:
    """Coordinates of an anchoring-compatible tensor in a surface frame.

    ``frame`` is a 3x3 array whose rows are T, N, nu.
    """

    p: np.ndarray
    beta: float
    frame: np.ndarray

    @property
    def rho(self) -> float:
        return float(np.hypot(*self.p))

    @property
    def psi(self) -> float:
        """Director angle measured from T (defined modulo pi)."""
        return 0.5 * float(np.arctan2(self.p[1], self.p[0]))


def _unit(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"{name} must be a unit 3-vector")
    return v


def is_qtensor(Q, tol: float = SYM_TOL) -> bool:
    Q = np.asarray(Q, dtype=float)
    if Q.shape[-2:] != (3, 3):
        return False
    asym = np.abs(Q - np.swapaxes(Q, -1, -2)).max()
    tr = np.abs(np.trace(Q, axis1=-2, axis2=-1)).max()
    return bool(asym <= tol and tr <= tol)


def as_qtensor(Q, tol: float = SYM_TOL) -> np.ndarray:
    """Return Q as a float array after checking symmetry and tracelessness."""
    Q = np.asarray(Q, dtype=float)
    if not is_qtensor(Q, tol):
        raise InvalidInputError("expected a symmetric traceless 3x3 tensor")
    return Q


def project_qtensor(M) -> np.ndarray:
    """Nearest symmetric traceless tensor (Frobenius projection)."""
    M = np.asarray(M, dtype=float)
    S = 0.5 * (M + np.swapaxes(M, -1, -2))
    tr = np.trace(S, axis1=-2, axis2=-1)
    return S - tr[..., None, None] * I3 / 3.0


def from_uniaxial(S: float, n) -> np.ndarray:
    n = _unit(n, "director")
    return S * (np.outer(n, n) - I3 / 3.0)


def spectral(Q) -> Spectrum:
    """Eigen-decomposition with ascending eigenvalues.

    Repeated eigenvalues yield an arbitrary orthonormal basis of the
    eigenspace.
    """
    Q = as_qtensor(Q, tol=1e-10)
    w, V = np.linalg.eigh(Q)
    return Spectrum(w, V)


def frame_matrix(T, N, nu) -> np.ndarray:
    F = np.array([T, N, nu], dtype=float)
    if np.abs(F @ F.T - I3).max() > FRAME_TOL:
        raise InvalidInputError("frame must be orthonormal")
    return F


def assemble_from_p(rep: PRepresentation) -> np.ndarray:
    """Q = p1 (TT - NN) + p2 (TN + NT) + (3 beta / 2)(nu nu - I/3)."""
    F = np.asarray(rep.frame, dtype=float)
    if F.shape != (3, 3) or np.abs(F @ F.T - I3).max() > FRAME_TOL:
        raise InvalidInputError("frame must be orthonormal")
    p1, p2 = np.asarray(rep.p, dtype=float)
    return assemble_p_field(p1, p2, rep.beta, F[0], F[1], F[2])


def assemble_p_field(p1, p2, beta, T, N, nu) -> np.ndarray:
    """Vectorized assembly; T, N, nu have shape (..., 3), p1/p2 shape (...)."""
    p1 = np.asarray(p1, dtype=float)[..., None, None]
    p2 = np.asarray(p2, dtype=float)[..., None, None]
    T, N, nu = (np.asarray(v, dtype=float) for v in (T, N, nu))
    TT = T[..., :, None] * T[..., None, :]
    NN = N[..., :, None] * N[..., None, :]
    TN = T[..., :, None] * N[..., None, :]
    nn = nu[..., :, None] * nu[..., None, :]
    return p1 * (TT - NN) + p2 * (TN + np.swapaxes(TN, -1, -2)) + 1.5 * beta * (nn - I3 / 3.0)


def extract_p(Q, frame) -> PRepresentation:
    """Inverse of :func:`assemble_from_p` for tensors with eigenvector nu."""
    Q = as_qtensor(Q, tol=1e-10)
    F = np.asarray(frame, dtype=float)
    if F.shape != (3, 3) or np.abs(F @ F.T - I3).max() > FRAME_TOL:
        raise InvalidInputError("frame must be orthonormal")
    T, N, nu = F
    Qnu = Q @ nu
    beta = float(nu @ Qnu)
    if np.linalg.norm(Qnu - beta * nu) > EIGVEC_TOL:
        raise NotRepresentableError("nu is not an eigenvector of Q")
    p1 = 0.5 * (T @ Q @ T - N @ Q @ N)
    p2 = T @ Q @ N
    return PRepresentation(np.array([p1, p2]), beta, F)


def p_from_director_angle(rho, psi) -> np.ndarray:
    """p = rho (cos 2 psi, sin 2 psi)."""
    psi = np.asarray(psi, dtype=float)
    return np.stack([rho * np.cos(2 * psi), rho * np.sin(2 * psi)], axis=-1)


def traceless_basis() -> np.ndarray:
    """Frobenius-orthonormal basis (5, 3, 3) of symmetric traceless tensors.

    Order: the three off-diagonal shears (12, 13, 23), then
    diag(1, -1, 0)/sqrt(2) and diag(1, 1, -2)/sqrt(6).
    """
    E = np.zeros((5, 3, 3))
    r = 1 / np.sqrt(2)
    for a, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
        E[a, i, j] = E[a, j, i] = r
    E[3] = np.diag([1.0, -1.0, 0.0]) * r
    E[4] = np.diag([1.0, 1.0, -2.0]) / np.sqrt(6)
    return E


def random_qtensor(rng: np.random.Generator, scale: float = 1.0, size=None) -> np.ndarray:
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    M = rng.normal(scale=scale, size=shape + (3, 3))
    return project_qtensor(M)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed proper rotation."""
    A = rng.normal(size=(3, 3))
    Qm, R = np.linalg.qr(A)
    Qm = Qm * np.sign(np.diag(R))
    if np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm
