"""Linear state-space types, zero-order-hold discretization and covariance helpers.

Discrete model convention::

    x[t+1] = A x[t] + B u[t] + G v[t]
    y[t]   = C x[t] + D v[t]          v[t] ~ N(0, I_m),  G D^T = 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, ModelConstructionError, NumericalFailure


def _as_matrix(name, M, rows=None, cols=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ModelConstructionError(f"{name} must be 2-D, got shape {M.shape}")
    if rows is not None and M.shape[0] != rows:
        raise ModelConstructionError(f"{name} has {M.shape[0]} rows, expected {rows}")
    if cols is not None and M.shape[1] != cols:
        raise ModelConstructionError(f"{name} has {M.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(M)):
        raise ModelConstructionError(f"{name} has non-finite entries")
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Discrete-time model (A, B, C, G, D) with uncorrelated process/measurement noise.

    Parameters
    ----------
    A : (n, n) array
    B : (n, q) array
    C : (p, n) array
    G : (n, m) array
        Process-noise input.
    D : (p, m) array
        Measurement-noise input. ``G @ D.T`` must be exactly zero and
        ``D @ D.T`` positive definite.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if A.shape[1] != n:
            raise ModelConstructionError(f"A must be square, got {A.shape}")
        B = _as_matrix("B", self.B, rows=n)
        C = _as_matrix("C", self.C, cols=n)
        G = _as_matrix("G", self.G, rows=n)
        D = _as_matrix("D", self.D, rows=C.shape[0], cols=G.shape[1])
        if np.any(G @ D.T != 0.0):
            raise ModelConstructionError("process and measurement noise are correlated: G D^T != 0")
        DD = D @ D.T
        if np.linalg.eigvalsh(DD).min() <= 0.0:
            raise ModelConstructionError("D D^T is not positive definite")
        for name, M in zip("ABCGD", (A, B, C, G, D)):
            object.__setattr__(self, name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def GG(self) -> np.ndarray:
        return self.G @ self.G.T

    @property
    def DD(self) -> np.ndarray:
        return self.D @ self.D.T


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """Continuous-time model ``dx = A x dt + B u dt + G dw``, ``y = C x + D w'``.

    ``G`` and ``D`` are diffusion / measurement intensities per unit white noise.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if A.shape[1] != n:
            raise ModelConstructionError(f"A must be square, got {A.shape}")
        B = _as_matrix("B", self.B, rows=n)
        C = _as_matrix("C", self.C, cols=n)
        G = _as_matrix("G", self.G, rows=n)
        D = _as_matrix("D", self.D, rows=C.shape[0], cols=G.shape[1])
        for name, M in zip("ABCGD", (A, B, C, G, D)):
            object.__setattr__(self, name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {n}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise DomainError("belief has non-finite entries")
        scale = max(np.abs(cov).max(), np.finfo(float).tiny)
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise DomainError("covariance is not symmetric")
        tr = np.trace(cov)
        if n and np.linalg.eigvalsh(cov).min() < -1e-12 * max(tr, 0.0):
            raise DomainError("covariance is not positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


def matrix_exponential(M) -> np.ndarray:
    """exp(M) by scaling-and-squaring Pade (scipy); raises on overflow."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise NumericalFailure("matrix exponential of a non-finite matrix")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(M)
    if not np.all(np.isfinite(E)):
        raise NumericalFailure("matrix exponential overflowed")
    return E


def psd_project(S) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to zero."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w.min() >= 0.0:
        return S
    w = np.clip(w, 0.0, None)
    out = (V * w) @ V.T
    return 0.5 * (out + out.T)


def psd_sqrt(S) -> np.ndarray:
    """A factor F with F F^T = S for symmetric PSD ``S`` (Cholesky when S > 0)."""
    S = psd_project(S)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(S)
        return V * np.sqrt(np.clip(w, 0.0, None))


def discretize_zoh(cm: ContinuousModel, T: float) -> LinearModel:
    """Zero-order-hold discretization with Van Loan noise integration.

    The discrete process-noise covariance is
    ``int_0^T exp(A s) G G^T exp(A^T s) ds``. The returned model stacks its
    square root and the measurement-noise factor in disjoint noise channels,
    so ``G D^T = 0`` holds by construction and ``m = n + p``.
    """
    if not (np.isfinite(T) and T > 0):
        raise DomainError(f"sample time must be positive, got {T}")
    if np.any(cm.G @ cm.D.T != 0.0):
        raise ModelConstructionError("continuous noise channels are correlated: G D^T != 0")
    n, q, p = cm.n, cm.B.shape[1], cm.C.shape[0]

    aug = np.zeros((n + q, n + q))
    aug[:n, :n] = cm.A
    aug[:n, n:] = cm.B
    E = matrix_exponential(aug * T)
    A, B = E[:n, :n], E[:n, n:]

    # Van Loan: expm([[-A, GG^T], [0, A^T]] T) = [[., F12], [0, F22]], Qd = F22^T F12
    vl = np.zeros((2 * n, 2 * n))
    vl[:n, :n] = -cm.A
    vl[:n, n:] = cm.G @ cm.G.T
    vl[n:, n:] = cm.A.T
    F = matrix_exponential(vl * T)
    Qd = psd_project(F[n:, n:].T @ F[:n, n:])

    G = np.zeros((n, n + p))
    G[:, :n] = psd_sqrt(Qd)
    D = np.zeros((p, n + p))
    D[:, n:] = psd_sqrt(cm.D @ cm.D.T)
    return LinearModel(A=A, B=B, C=cm.C.copy(), G=G, D=D)
