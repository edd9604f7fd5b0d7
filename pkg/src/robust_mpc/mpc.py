"""Unconstrained receding-horizon MPC.

Predictions over ``Hp`` steps are ``y_stack = Psi x + Theta u_plan`` where
``u_plan`` holds ``Hu`` free moves and the last move is held until the end
of the horizon. The default cost penalizes output error and input moves::

    J = sum_k |y[t+k] - r[t+k]|^2_Q  +  sum_j |u[t+j] - u[t+j-1]|^2_R

with ``u[t-1]`` the previously applied input. ``penalize="u"`` replaces
the move penalty by ``|u[t+j]|^2_R``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.linalg

from .errors import DomainError, IllPosedProblem
from .statespace import LinearModel


def _weight_blocks(W, count, dim, name):
    """Normalize a scalar / matrix / per-step sequence weight to ``count`` (dim, dim) blocks."""
    arr = np.asarray(W, dtype=float)
    if arr.ndim == 0:
        blocks = [arr * np.eye(dim)] * count
    elif arr.ndim == 2:
        blocks = [arr] * count
    elif arr.ndim == 3:
        if arr.shape[0] != count:
            raise DomainError(f"{name} has {arr.shape[0]} per-step blocks, expected {count}")
        blocks = list(arr)
    elif arr.ndim == 1 and arr.shape[0] == count:
        blocks = [w * np.eye(dim) for w in arr]
    else:
        raise DomainError(f"cannot interpret {name} with shape {arr.shape}")
    for b in blocks:
        if b.shape != (dim, dim):
            raise DomainError(f"{name} block has shape {b.shape}, expected {(dim, dim)}")
        if np.abs(b - b.T).max() > 1e-12 * max(np.abs(b).max(), 1.0):
            raise DomainError(f"{name} is not symmetric")
        if np.linalg.eigvalsh(b).min() < -1e-12 * max(np.abs(b).max(), 1.0):
            raise DomainError(f"{name} is not positive semidefinite")
    return blocks


@dataclass(frozen=True)
class MpcConfig:
    """Horizons and weights.

    ``Qk``/``Rk`` may be a scalar (times identity), a single matrix repeated
    over the horizon, or a sequence of per-step blocks. ``input_scale`` expresses
    the input weight in normalized units: the effective weight on the raw input
    is ``Rk / input_scale**2``.
    """

    Hp: int
    Hu: int
    Qk: object = 1.0
    Rk: object = 1.0
    penalize: Literal["delta_u", "u"] = "delta_u"
    input_scale: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.Hp, (int, np.integer)) and isinstance(self.Hu, (int, np.integer))):
            raise DomainError("horizons must be integers")
        if not 1 <= self.Hu <= self.Hp:
            raise DomainError(f"need 1 <= Hu <= Hp, got Hu={self.Hu}, Hp={self.Hp}")
        if self.penalize not in ("delta_u", "u"):
            raise DomainError(f"penalize must be 'delta_u' or 'u', got {self.penalize!r}")
        if not self.input_scale > 0:
            raise DomainError("input_scale must be positive")

    def Q(self, p: int) -> np.ndarray:
        return scipy.linalg.block_diag(*_weight_blocks(self.Qk, self.Hp, p, "Qk"))

    def R(self, q: int) -> np.ndarray:
        blocks = _weight_blocks(self.Rk, self.Hu, q, "Rk")
        return scipy.linalg.block_diag(*blocks) / self.input_scale**2


@dataclass(frozen=True, eq=False)
class PredictionMatrices:
    Psi: np.ndarray
    Theta: np.ndarray
    p: int
    q: int


@dataclass(frozen=True, eq=False)
class MpcSolution:
    u_now: np.ndarray
    u_plan: np.ndarray
    predicted_outputs: np.ndarray
    cost: float


def build_prediction(model: LinearModel, cfg: MpcConfig) -> PredictionMatrices:
    A, B, C = model.A, model.B, model.C
    n, q, p = model.n, model.q, model.p
    Hp, Hu = cfg.Hp, cfg.Hu

    # markov[k] = C A^k B; Psi block k is C A^(k+1)
    markov = np.empty((Hp, p, q))
    Psi = np.empty((p * Hp, n))
    CA = C.copy()
    for k in range(Hp):
        markov[k] = CA @ B
        CA = CA @ A
        Psi[k * p:(k + 1) * p] = CA

    Theta = np.zeros((p * Hp, q * Hu))
    for i in range(1, Hp + 1):
        rows = slice((i - 1) * p, i * p)
        for j in range(min(i, Hu - 1)):
            Theta[rows, j * q:(j + 1) * q] = markov[i - 1 - j]
        if i >= Hu:
            # last free move is held for the rest of the horizon
            Theta[rows, (Hu - 1) * q:Hu * q] = markov[: i - Hu + 1].sum(axis=0)
    return PredictionMatrices(Psi=Psi, Theta=Theta, p=p, q=q)


def difference_operator(Hu: int, q: int) -> np.ndarray:
    """Block lifting ``S`` with ``(S u)_j = u_j - u_(j-1)`` for j >= 1 and ``(S u)_0 = u_0``."""
    return np.kron(np.eye(Hu) - np.eye(Hu, k=-1), np.eye(q))


def solve_mpc(pm: PredictionMatrices, cfg: MpcConfig, x_hat, r_stack, u_prev=None) -> MpcSolution:
    """Exact minimizer of the quadratic cost through a Cholesky solve.

    Raises :class:`IllPosedProblem` when the Hessian is singular to working precision.
    """
    p, q, Hu = pm.p, pm.q, cfg.Hu
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    r_stack = np.asarray(r_stack, dtype=float).reshape(-1)
    if r_stack.shape[0] != p * cfg.Hp:
        raise DomainError(f"reference stack has length {r_stack.shape[0]}, expected {p * cfg.Hp}")
    u_prev = np.zeros(q) if u_prev is None else np.asarray(u_prev, dtype=float).reshape(q)

    Q = cfg.Q(p)
    R = cfg.R(q)
    Th = pm.Theta
    err = r_stack - pm.Psi @ x_hat
    if cfg.penalize == "delta_u":
        S = difference_operator(Hu, q)
        u_ref = np.zeros(q * Hu)
        u_ref[:q] = u_prev
    else:
        S = np.eye(q * Hu)
        u_ref = np.zeros(q * Hu)

    H = Th.T @ Q @ Th + S.T @ R @ S
    H = 0.5 * (H + H.T)
    g = Th.T @ Q @ err + S.T @ R @ u_ref

    w = np.linalg.eigvalsh(H)
    if w.max() <= 0 or w.min() <= H.shape[0] * np.finfo(float).eps * w.max():
        raise IllPosedProblem(
            "MPC Hessian Theta^T Q Theta + S^T R S is singular; increase Rk or the horizons"
        )
    u_plan = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)

    pred = pm.Psi @ x_hat + Th @ u_plan
    dy = pred - r_stack
    du = S @ u_plan - u_ref
    cost = float(dy @ Q @ dy + du @ R @ du)
    return MpcSolution(u_now=u_plan[:q].copy(), u_plan=u_plan, predicted_outputs=pred, cost=cost)


def stack_reference(r_fn: Callable[[int], object], t: int, Hp: int) -> np.ndarray:
    """``[r(t+1), ..., r(t+Hp)]`` flattened; ``r_fn`` maps a step index to a p-vector."""
    return np.concatenate([np.atleast_1d(np.asarray(r_fn(t + k), dtype=float)) for k in range(1, Hp + 1)])
