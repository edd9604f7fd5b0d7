"""Robust Kalman filter over a Kullback-Leibler ball of radius ``c``.

The recursion has the Kalman structure with the prediction covariance
``P`` replaced, for gain and Riccati purposes, by the inflated matrix
``V = (P^-1 - theta I)^-1``. At every step ``theta`` is the unique root of

    gamma(P, theta) = log det(I - theta P) + tr (I - theta P)^-1 - n = c

on ``0 < theta < 1 / lambda_max(P)``, found by bisection. ``c = 0`` gives
``theta = 0`` and the standard filter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError, NumericalFailure
from .kalman import FilterState, _check_dims, gains, riccati_update
from .statespace import GaussianBelief, LinearModel

THETA_TOL = 1e-10
THETA_MAX_ITER = 256


@dataclass(frozen=True, eq=False)
class RobustFilterState(FilterState):
    """:class:`FilterState` plus the inflated covariance ``V``, ``theta`` and radius ``c``."""

    V: np.ndarray | None = None
    theta: float = 0.0
    c: float = 0.0


def gamma(P, theta: float) -> float:
    """Left-hand side of the theta equation, evaluated with matrix operations."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    lmax = np.linalg.eigvalsh(P).max()
    if theta < 0 or (lmax > 0 and theta * lmax >= 1.0):
        raise DomainError(f"theta={theta} outside [0, 1/lambda_max(P)) with lambda_max={lmax}")
    M = np.eye(n) - theta * P
    sign, logdet = np.linalg.slogdet(M)
    if sign <= 0:
        raise DomainError("I - theta P is not positive definite")
    return float(logdet + np.trace(np.linalg.inv(M)) - n)


def solve_theta(P, c: float, tol: float = THETA_TOL) -> float:
    """Bisection for ``gamma(P, theta) = c``; ``|gamma(P, theta*) - c| <= tol``."""
    if not c > 0:
        raise DomainError(f"tolerance radius c must be positive, got {c}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    lam = np.linalg.eigvalsh(0.5 * (P + P.T))
    # zero eigenvalues contribute nothing to gamma, so a singular P is fine
    if lam.max() <= 0 or lam.min() < -1e-12 * lam.max():
        raise DomainError("P must be positive semidefinite and nonzero to solve for theta")
    theta, resid, status = kernels.theta_bisect(lam, float(c), float(tol), THETA_MAX_ITER)
    if status != kernels.THETA_OK:
        raise NumericalFailure(
            f"theta bisection failed (status {status}): c={c}, residual={resid:.3e}"
        )
    return float(theta)


def inflate(P: np.ndarray, theta: float) -> np.ndarray:
    """``V = (P^-1 - theta I)^-1`` computed as the solution of ``(I - theta P) V = P``."""
    if theta == 0.0:
        return P.copy()
    n = P.shape[0]
    V = np.linalg.solve(np.eye(n) - theta * P, P)
    V = 0.5 * (V + V.T)
    if not np.all(np.isfinite(V)):
        raise NumericalFailure(f"inflated covariance is not finite (theta={theta})")
    w = np.linalg.eigvalsh(V)
    if w.min() < -1e-12 * max(w.max(), 1.0):
        raise NumericalFailure(f"inflated covariance is not positive semidefinite (theta={theta})")
    return V


def rkf_init(prior: GaussianBelief, c: float) -> RobustFilterState:
    if not c >= 0:
        raise DomainError(f"c must be nonnegative, got {c}")
    return RobustFilterState(x_pred=prior.mean.copy(), P=prior.covariance.copy(), t=0, c=float(c))


def rkf_update(st: RobustFilterState, model: LinearModel, y) -> RobustFilterState:
    """Solve for theta, inflate, and do the measurement update of step ``t``."""
    _check_dims(st, model)
    y = np.asarray(y, dtype=float).reshape(model.p)
    theta = solve_theta(st.P, st.c) if st.c > 0 else 0.0
    V = inflate(st.P, theta)
    L, K, S = gains(V, model)
    e = y - model.C @ st.x_pred
    return replace(st, x_filt=st.x_pred + L @ e, L=L, K=K, innovation=e, S=S, V=V, theta=theta)


def rkf_predict(st: RobustFilterState, model: LinearModel, u) -> RobustFilterState:
    if not st.updated:
        raise DomainError("rkf_predict needs a state that went through rkf_update")
    u = np.asarray(u, dtype=float).reshape(model.q)
    x_next = model.A @ st.x_pred + st.K @ st.innovation + model.B @ u
    P_next = riccati_update(st.V, st.K, st.S, model)
    return RobustFilterState(x_pred=x_next, P=P_next, t=st.t + 1, c=st.c)


def rkf_step(st: RobustFilterState, model: LinearModel, y, u) -> RobustFilterState:
    """Like :func:`robust_mpc.kalman.kf_step`; ``V`` and ``theta`` refer to step ``t``."""
    up = rkf_update(st, model, y)
    nxt = rkf_predict(up, model, u)
    return replace(
        nxt, x_filt=up.x_filt, L=up.L, K=up.K, innovation=up.innovation, S=up.S,
        V=up.V, theta=up.theta,
    )


def rkf_run(
    model: LinearModel,
    prior: GaussianBelief,
    c: float,
    ys: Sequence,
    us: Sequence,
) -> list[RobustFilterState]:
    if len(ys) != len(us):
        raise DomainError(f"ys and us differ in length ({len(ys)} vs {len(us)})")
    st = rkf_init(prior, c)
    out = []
    for y, u in zip(ys, us):
        st = rkf_step(st, model, y, u)
        out.append(st)
    return out
