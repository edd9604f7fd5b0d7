"""Closed-loop simulation of MPC + (robust) Kalman filter on the servo plant.

Per sample ``k`` the loop is:

1. measure ``y[k]`` from the plant (seeded noise),
2. filter measurement update -> ``x[k|k]``,
3. MPC on ``x[k|k]``, the reference preview and ``u[k-1]`` -> ``u[k]``,
4. filter time update with ``(y[k], u[k])``,
5. integrate the plant over one period with ``u[k]`` held.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DivergenceError, DomainError, NumericalFailure
from .kalman import kf_init, kf_predict, kf_update
from .mpc import MpcConfig, build_prediction, solve_mpc
from .robust_kalman import rkf_init, rkf_predict, rkf_update
from .servo import NoiseSpec, ServoParams, build_nominal_linear, nominal_params, perturbed_params
from .statespace import GaussianBelief

PLANT_KINDS = ("linear-nominal", "nonlinear-perturbed")
METRIC_NAMES = (
    "tracking_rmse_settled", "tracking_rmse_steady", "control_energy",
    "smoothness", "smoothness_steady", "max_overshoot",
)


def square_wave(t, period: float = 50.0, duty: float = 0.5, low: float = 0.0, high: float = math.pi):
    """``high`` on ``[n P, n P + duty P)``, ``low`` otherwise. Accepts scalars or arrays."""
    if not period > 0:
        raise DomainError("period must be positive")
    if not 0 < duty < 1:
        raise DomainError("duty must lie in (0, 1)")
    phase = np.mod(np.asarray(t, dtype=float), period)
    out = np.where(phase < duty * period, high, low)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SquareWave:
    period: float = 50.0
    duty: float = 0.5
    low: float = 0.0
    high: float = math.pi

    def __call__(self, t):
        return square_wave(t, self.period, self.duty, self.low, self.high)

    def edges(self, t_end: float) -> np.ndarray:
        """Switching instants in ``[0, t_end]``; ``t = 0`` counts as an edge."""
        n = int(np.ceil(t_end / self.period)) + 1
        base = np.arange(n) * self.period
        e = np.sort(np.concatenate([base, base + self.duty * self.period]))
        return e[e <= t_end + 1e-9]


@dataclass(frozen=True)
class ConstantReference:
    value: float = 0.0

    def __call__(self, t):
        out = np.full(np.shape(t), self.value, dtype=float)
        return float(out) if out.ndim == 0 else out

    def edges(self, t_end: float) -> np.ndarray:
        return np.array([0.0])


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment for one controller.

    ``c`` is the KL radius; ``robust=False`` selects the standard Kalman
    filter (S-MPC) and ignores ``c``. ``prior=None`` means
    ``N(0, G G^T)`` of the nominal discrete model. ``inject_noise=False``
    runs the loop noise-free while the filter keeps its noise model.
    """

    name: str = "scenario"
    controller: str = "S-MPC"
    robust: bool = False
    c: float = 0.0
    plant_kind: str = "linear-nominal"
    duration: float = 200.0
    sample_time: float = 0.1
    reference: object = field(default_factory=SquareWave)
    seed: int = 0
    mpc: MpcConfig = field(default_factory=lambda: MpcConfig(Hp=10, Hu=3, Qk=0.1, Rk=0.1, input_scale=220.0))
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    prior: GaussianBelief | None = None
    model_params: ServoParams = field(default_factory=nominal_params)
    plant_params: ServoParams = field(default_factory=perturbed_params)
    substeps: int = 100
    settle_window: float = 10.0
    inject_noise: bool = True

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError(f"duration must be positive, got {self.duration}")
        if not self.sample_time > 0:
            raise DomainError(f"sample_time must be positive, got {self.sample_time}")
        if not self.c >= 0:
            raise DomainError(f"c must be nonnegative, got {self.c}")
        if self.plant_kind not in PLANT_KINDS:
            raise DomainError(f"plant_kind must be one of {PLANT_KINDS}, got {self.plant_kind!r}")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")
        if not self.settle_window >= 0:
            raise DomainError("settle_window must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.sample_time))


@dataclass(eq=False)
class ScenarioResult:
    """Traces of one run, one row per sample.

    ``y`` is the measured load angle and ``y_true`` the noiseless one; ``u`` is
    the voltage the plant actually received (saturated for the servo);
    ``theta`` is NaN for standard-filter runs. ``p_lmax[k]`` is the largest
    eigenvalue of the predicted covariance that entered the update at step
    ``k`` (so ``0 < theta[k] < 1 / p_lmax[k]``). A failed run has
    ``failed=True``, NaN metrics and traces truncated at the failing step.
    """

    name: str
    controller: str
    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    y_true: np.ndarray
    u: np.ndarray
    x_hat: np.ndarray
    theta: np.ndarray
    metrics: dict
    p_lmax: np.ndarray | None = None
    robust: bool = False
    failed: bool = False
    error: str | None = None


def settled_mask(t: np.ndarray, edges: np.ndarray, settle_window: float, preview: float) -> np.ndarray:
    """Samples at least ``settle_window`` after the last edge and more than
    ``preview`` before the next one (the MPC sees edges ``preview`` early)."""
    t = np.asarray(t, dtype=float)
    edges = np.sort(np.asarray(edges, dtype=float))
    tol = 1e-9
    idx = np.searchsorted(edges, t + tol, side="right") - 1
    since = np.where(idx >= 0, t - edges[np.clip(idx, 0, None)], np.inf)
    nxt = idx + 1
    until = np.where(nxt < edges.size, edges[np.clip(nxt, 0, edges.size - 1)] - t, np.inf)
    return (since >= settle_window - tol) & (until > preview + tol)


def compute_metrics(
    t, r, y_true, u, edges, sample_time: float, settle_window: float = 10.0, preview: float = 0.0,
    band: float = 0.02,
) -> dict:
    """Scalar summaries of one run.

    ``tracking_rmse_settled`` is the RMSE of ``y_true - r`` leaving out the
    first ``settle_window`` seconds after every edge. ``tracking_rmse_steady``
    additionally leaves out the ``preview`` seconds before every edge, where a
    controller that sees the reference ahead starts moving early.
    ``control_energy`` is ``sum u^2 T``; ``smoothness`` is ``sum (u[k] - u[k-1])^2``
    over the whole run (``u[-1] = 0``; larger means rougher) and
    ``smoothness_steady`` the same sum restricted to the steady samples.
    ``max_overshoot`` is the largest ``|y_true - r|`` seen after the output first
    enters a ``band``-relative settling band following an edge.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    y_true = np.asarray(y_true, dtype=float)
    u = np.asarray(u, dtype=float)
    err = y_true - r

    def rms(mask):
        return float(np.sqrt(np.mean(err[mask] ** 2))) if mask.any() else float("nan")

    settled = settled_mask(t, edges, settle_window, 0.0)
    steady = settled_mask(t, edges, settle_window, preview)
    energy = float(np.sum(u**2) * sample_time)
    du2 = np.diff(u, prepend=0.0) ** 2

    overshoot = 0.0
    edges = np.sort(np.asarray(edges, dtype=float))
    for i, e in enumerate(edges):
        end = edges[i + 1] if i + 1 < edges.size else np.inf
        seg = np.nonzero((t >= e - 1e-9) & (t < end - 1e-9))[0]
        if seg.size == 0:
            continue
        before = r[seg[0] - 1] if seg[0] > 0 else 0.0
        amp = abs(r[seg[0]] - before)
        tol_band = band * amp if amp > 0 else band
        inside = np.nonzero(np.abs(err[seg]) <= tol_band)[0]
        start = inside[0] if inside.size else 0
        overshoot = max(overshoot, float(np.abs(err[seg[start:]]).max()))
    return {
        "tracking_rmse_settled": rms(settled),
        "tracking_rmse_steady": rms(steady),
        "control_energy": energy,
        "smoothness": float(np.sum(du2)),
        "smoothness_steady": float(np.sum(du2[steady])),
        "max_overshoot": overshoot,
    }


def run_scenario(sc: Scenario) -> ScenarioResult:
    T = sc.sample_time
    N = sc.n_steps
    model = build_nominal_linear(sc.model_params, sc.noise, T)
    n, q = model.n, model.q
    pm = build_prediction(model, sc.mpc)
    Hp = sc.mpc.Hp
    prior = sc.prior
    if prior is None:
        GG = model.GG
        prior = GaussianBelief(np.zeros(n), 0.5 * (GG + GG.T))

    t = np.arange(N) * T
    r_all = np.asarray(sc.reference(np.arange(N + Hp) * T), dtype=float)
    rng = np.random.default_rng(sc.seed)

    if sc.robust:
        st = rkf_init(prior, sc.c)
        update, predict = rkf_update, rkf_predict
    else:
        st = kf_init(prior)
        update, predict = kf_update, kf_predict

    linear_plant = sc.plant_kind == "linear-nominal"
    if linear_plant:
        x = np.zeros(n)
    else:
        x = np.zeros(5)
        prm = sc.plant_params.packed()
        vsat = sc.plant_params.v_sat

    y_tr = np.full(N, np.nan)
    y_meas = np.full(N, np.nan)
    u_tr = np.full(N, np.nan)
    xh_tr = np.full((N, n), np.nan)
    th_tr = np.full(N, np.nan)
    lmax_tr = np.full(N, np.nan)
    u_prev = np.zeros(q)
    error = None
    done = N
    for k in range(N):
        try:
            v = rng.standard_normal(model.m) if sc.inject_noise else np.zeros(model.m)
            # both plants output the load angle, the first state
            y_true = float(x[0])
            y = np.array([y_true]) + model.D @ v
            lmax_tr[k] = np.linalg.eigvalsh(st.P)[-1]
            st = update(st, model, y)
            sol = solve_mpc(pm, sc.mpc, st.x_filt, r_all[k + 1:k + 1 + Hp], u_prev)
            u = sol.u_now
            y_tr[k] = y_true
            y_meas[k] = float(y[0])
            xh_tr[k] = st.x_filt
            if sc.robust:
                th_tr[k] = st.theta
            if linear_plant:
                u_tr[k] = float(u[0])
                x = model.A @ x + model.B @ u + model.G @ v
                if not np.all(np.isfinite(x)):
                    raise DivergenceError("linear plant state became non-finite")
            else:
                u_tr[k] = min(max(float(u[0]), -vsat), vsat)
                x = kernels.servo_rk4(x, float(u[0]), prm, T, sc.substeps)
                if not np.all(np.isfinite(x)):
                    raise DivergenceError(f"servo state became non-finite at t={t[k]:.1f}s")
            st = predict(st, model, u)
            u_prev = u
        except NumericalFailure as exc:
            error = str(exc)
            done = k
            break

    failed = error is not None
    if failed:
        metrics = {name: float("nan") for name in METRIC_NAMES}
    else:
        metrics = compute_metrics(
            t, r_all[:N], y_tr, u_tr, sc.reference.edges(sc.duration), T,
            settle_window=sc.settle_window, preview=Hp * T,
        )
    return ScenarioResult(
        name=sc.name, controller=sc.controller, t=t[:done], r=r_all[:done], y=y_meas[:done],
        y_true=y_tr[:done], u=u_tr[:done], x_hat=xh_tr[:done], theta=th_tr[:done],
        metrics=metrics, p_lmax=lmax_tr[:done], robust=sc.robust, failed=failed, error=error,
    )


@dataclass(eq=False)
class Comparison:
    results: list
    ranking: list  # indices of results, best tracking first

    def rows(self) -> list[dict]:
        out = []
        for rank, i in enumerate(self.ranking, start=1):
            res = self.results[i]
            out.append({"rank": rank, "scenario": res.name, "controller": res.controller, **res.metrics})
        return out

    def by_controller(self) -> dict:
        return {res.controller: res for res in self.results}


def _run_indexed(args):
    i, sc = args
    return i, run_scenario(sc)


def compare_controllers(scenarios: Sequence[Scenario], workers: int = 1) -> Comparison:
    """Run each scenario and rank the results by settled tracking RMSE."""
    scenarios = list(scenarios)
    if workers > 1 and len(scenarios) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            pairs = sorted(ex.map(_run_indexed, enumerate(scenarios)), key=lambda p: p[0])
        results = [res for _, res in pairs]
    else:
        results = [run_scenario(sc) for sc in scenarios]

    def key(i):
        v = results[i].metrics["tracking_rmse_settled"]
        return (math.isnan(v), v, i)

    return Comparison(results=results, ranking=sorted(range(len(results)), key=key))


def standard_roster() -> list[tuple[str, bool, float]]:
    return [("S-MPC", False, 0.0), ("R-MPC1", True, 0.1), ("R-MPC2", True, 1.0)]


def servo_scenarios(plant_kind: str, seed: int = 0, duration: float = 200.0, **overrides) -> list[Scenario]:
    """The three controllers of the servo comparison on one plant."""
    name = "sim1" if plant_kind == "linear-nominal" else "sim2"
    base = Scenario(name=name, plant_kind=plant_kind, seed=seed, duration=duration, **overrides)
    return [replace(base, controller=label, robust=robust, c=c) for label, robust, c in standard_roster()]
