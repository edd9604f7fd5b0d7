"""Kalman filter with a known input.

One call of :func:`kf_step` consumes ``(y[t], u[t])`` and returns the
filtered estimate ``x[t|t]`` together with the one-step prediction
``x[t+1|t]`` and its error covariance. In a closed loop the measurement
update and the time update are separated by the controller, so both halves
are exposed as :func:`kf_update` and :func:`kf_predict`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalFailure
from .statespace import GaussianBelief, LinearModel, psd_project


@dataclass(frozen=True, eq=False)
class FilterState:
    """Running state of a Kalman-type filter.

    Attributes
    ----------
    x_pred : (n,) array
        ``x[t|t-1]``.
    P : (n, n) array
        Prediction error covariance ``P[t]``.
    x_filt : (n,) array or None
        ``x[t|t]``; populated by the measurement update.
    L, K : (n, p) arrays or None
        Filter and predictor gains of step ``t`` (``K = A L``).
    innovation : (p,) array or None
        ``y[t] - C x[t|t-1]``.
    S : (p, p) array or None
        Innovation covariance used for the gains.
    t : int
        Step index of ``x_pred``.
    """

    x_pred: np.ndarray
    P: np.ndarray
    x_filt: Optional[np.ndarray] = None
    L: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    innovation: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    t: int = 0

    @property
    def updated(self) -> bool:
        return self.x_filt is not None


def kf_init(prior: GaussianBelief) -> FilterState:
    return FilterState(x_pred=prior.mean.copy(), P=prior.covariance.copy(), t=0)


def _check_dims(st: FilterState, model: LinearModel):
    if st.x_pred.shape != (model.n,) or st.P.shape != (model.n, model.n):
        raise DomainError(
            f"filter state of dimension {st.x_pred.shape[0]} does not match model with n={model.n}"
        )


def gains(V: np.ndarray, model: LinearModel):
    """Return ``(L, K, S)`` with ``S = C V C^T + D D^T``, ``L = V C^T S^-1``, ``K = A L``."""
    C = model.C
    S = C @ V @ C.T + model.DD
    S = 0.5 * (S + S.T)
    try:
        cf = scipy.linalg.cho_factor(S)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure("innovation covariance is singular") from exc
    L = scipy.linalg.cho_solve(cf, C @ V).T
    K = model.A @ L
    return L, K, S


def riccati_update(V: np.ndarray, K: np.ndarray, S: np.ndarray, model: LinearModel) -> np.ndarray:
    """``A V A^T - K S K^T + G G^T``, symmetrized and clipped to PSD."""
    P_next = model.A @ V @ model.A.T - K @ S @ K.T + model.GG
    return psd_project(P_next)


def kf_update(st: FilterState, model: LinearModel, y) -> FilterState:
    """Measurement update: populate ``x_filt``, gains and innovation for step ``t``."""
    _check_dims(st, model)
    y = np.asarray(y, dtype=float).reshape(model.p)
    L, K, S = gains(st.P, model)
    e = y - model.C @ st.x_pred
    return replace(st, x_filt=st.x_pred + L @ e, L=L, K=K, innovation=e, S=S)


def kf_predict(st: FilterState, model: LinearModel, u) -> FilterState:
    """Time update from an updated state; ``u`` is the input applied at step ``t``."""
    if not st.updated:
        raise DomainError("kf_predict needs a state that went through kf_update")
    u = np.asarray(u, dtype=float).reshape(model.q)
    x_next = model.A @ st.x_pred + st.K @ st.innovation + model.B @ u
    P_next = riccati_update(st.P, st.K, st.S, model)
    return FilterState(x_pred=x_next, P=P_next, t=st.t + 1)


def kf_step(st: FilterState, model: LinearModel, y, u) -> FilterState:
    """Full step. The result carries ``x_filt``/``L``/``K`` of step ``t`` and the
    prediction ``x_pred``/``P`` for step ``t + 1``."""
    up = kf_update(st, model, y)
    nxt = kf_predict(up, model, u)
    return replace(nxt, x_filt=up.x_filt, L=up.L, K=up.K, innovation=up.innovation, S=up.S)


def kf_run(
    model: LinearModel,
    prior: GaussianBelief,
    ys: Sequence,
    us: Sequence,
) -> list[FilterState]:
    if len(ys) != len(us):
        raise DomainError(f"ys and us differ in length ({len(ys)} vs {len(us)})")
    st = kf_init(prior)
    out = []
    for y, u in zip(ys, us):
        st = kf_step(st, model, y, u)
        out.append(st)
    return out
