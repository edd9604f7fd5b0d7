"""DC servomechanism benchmark: motor, gearbox, elastic shaft and load.

The true plant carries Coulomb plus exponentially decaying (deadzone)
friction on both shafts, armature inductance and a +-220 V input
saturation. The controller's nominal model drops all three and is
discretized with zero-order hold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import kernels
from .errors import DivergenceError, DomainError
from .statespace import ContinuousModel, LinearModel, discretize_zoh

EPS_MIN = 0.05
EPS_MAX = 0.10


@dataclass(frozen=True)
class ServoParams:
    L: float
    Jm: float
    beta_m: float
    R_a: float
    Kt: float
    rho: float
    k_theta: float
    Jl: float
    beta_l: float
    alpha_l: tuple = (0.0, 0.0, 0.0)
    alpha_m: tuple = (0.0, 0.0, 0.0)
    v_sat: float = 220.0

    def __post_init__(self):
        object.__setattr__(self, "alpha_l", tuple(float(a) for a in self.alpha_l))
        object.__setattr__(self, "alpha_m", tuple(float(a) for a in self.alpha_m))
        for name in ("Jm", "R_a", "Kt", "rho", "k_theta", "Jl", "v_sat"):
            if not getattr(self, name) > 0:
                raise DomainError(f"servo parameter {name} must be positive, got {getattr(self, name)}")
        for name in ("L", "beta_m", "beta_l"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"servo parameter {name} must be nonnegative")
        if len(self.alpha_l) != 3 or len(self.alpha_m) != 3:
            raise DomainError("friction parameter sets need exactly three coefficients")
        if min(self.alpha_l + self.alpha_m) < 0:
            raise DomainError("friction coefficients must be nonnegative")

    def packed(self) -> np.ndarray:
        """Flat float vector in the layout expected by :mod:`robust_mpc.kernels`."""
        return np.array(
            [self.L, self.Jm, self.beta_m, self.R_a, self.Kt, self.rho, self.k_theta,
             self.Jl, self.beta_l, *self.alpha_l, *self.alpha_m, self.v_sat],
            dtype=float,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha_l"] = list(self.alpha_l)
        d["alpha_m"] = list(self.alpha_m)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ServoParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown servo parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def linear_part(self) -> "ServoParams":
        """Same parameters with friction nonlinearities and inductance removed."""
        return replace(self, L=0.0, alpha_l=(0.0, 0.0, 0.0), alpha_m=(0.0, 0.0, 0.0))


def nominal_params() -> ServoParams:
    return ServoParams(
        L=0.0, Jm=0.5, beta_m=0.1, R_a=20.0, Kt=10.0, rho=20.0,
        k_theta=1280.2, Jl=25.0, beta_l=25.0, v_sat=220.0,
    )


# (parameter, relative perturbation) exactly as in the "real parameters" table
_PERTURBATION = {
    "Jm": +EPS_MAX,
    "beta_m": +EPS_MAX,
    "R_a": +EPS_MIN,
    "Kt": +EPS_MAX,
    "rho": +EPS_MIN,
    "k_theta": +EPS_MIN,
    "Jl": -EPS_MAX,
    "beta_l": +EPS_MAX,
}


def perturbed_params(rng: np.random.Generator | None = None) -> ServoParams:
    """True-plant parameters.

    Without ``rng`` the signed perturbations of the reference table are used.
    With ``rng`` every perturbation keeps its magnitude but gets a random sign.
    """
    nom = nominal_params()
    values = {}
    for name, eps in _PERTURBATION.items():
        if rng is not None:
            eps = abs(eps) * (1.0 if rng.random() < 0.5 else -1.0)
        values[name] = getattr(nom, name) * (1.0 + eps)
    return replace(nom, L=0.8, alpha_l=(0.5, 10.0, 0.5), alpha_m=(0.1, 2.0, 0.5), **values)


def friction_torque(omega, alpha) -> float:
    """``a0 sgn(w) + a1 exp(-a2 |w|) sgn(w)`` with ``sgn(0) = 0``."""
    a0, a1, a2 = alpha
    return kernels.friction(float(omega), float(a0), float(a1), float(a2))


@dataclass(frozen=True)
class PlantState:
    theta_l: float = 0.0
    omega_l: float = 0.0
    theta_m: float = 0.0
    omega_m: float = 0.0
    i_m: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_l, self.omega_l, self.theta_m, self.omega_m, self.i_m])

    @classmethod
    def from_array(cls, s) -> "PlantState":
        return cls(*(float(v) for v in s))


def plant_derivative(s: PlantState, V_in: float, p: ServoParams) -> PlantState:
    """Time derivative of the plant state under input voltage ``V_in`` (saturated here).

    When ``p.L == 0`` the current is algebraic and the returned ``i_m`` rate is 0.
    """
    v = float(np.clip(V_in, -p.v_sat, p.v_sat))
    out = np.empty(5)
    kernels.servo_rhs(s.as_array(), v, p.packed(), out)
    return PlantState.from_array(out)


def simulate_plant_step(
    s: PlantState, V_in: float, p: ServoParams, T: float = 0.1, substeps: int = 100
) -> PlantState:
    """Integrate one sample period with the (saturated) voltage held constant, using RK4."""
    if not T > 0:
        raise DomainError("T must be positive")
    if substeps < 1:
        raise DomainError("substeps must be >= 1")
    out = kernels.servo_rk4(s.as_array(), float(V_in), p.packed(), float(T), int(substeps))
    if not np.all(np.isfinite(out)):
        raise DivergenceError("servo state became non-finite")
    return PlantState.from_array(out)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise intensities for the nominal model.

    ``process_std`` are per-state diffusion intensities (units per sqrt(s)) on
    ``[theta_l, omega_l, theta_m, omega_m]``; ``measurement_std`` is the
    standard deviation of the load-angle sensor noise (rad).
    """

    process_std: tuple = (0.0, 0.01, 0.0, 0.1)
    measurement_std: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "process_std", tuple(float(v) for v in self.process_std))
        if len(self.process_std) != 4:
            raise DomainError("process_std needs one entry per state (4)")
        if min(self.process_std) < 0:
            raise DomainError("process_std entries must be nonnegative")
        if not self.measurement_std > 0:
            raise DomainError("measurement_std must be positive")


def continuous_linear(p: ServoParams, noise: NoiseSpec = NoiseSpec()) -> ContinuousModel:
    """Linearized servo with state ``[theta_l, omega_l, theta_m, omega_m]`` and load-angle output."""
    kth, rho, Jl, Jm = p.k_theta, p.rho, p.Jl, p.Jm
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-kth / Jl, -p.beta_l / Jl, kth / (rho * Jl), 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [kth / (rho * Jm), 0.0, -kth / (rho**2 * Jm), -(p.beta_m + p.Kt**2 / p.R_a) / Jm],
    ])
    B = np.array([[0.0], [0.0], [0.0], [p.Kt / (p.R_a * Jm)]])
    C = np.array([[1.0, 0.0, 0.0, 0.0]])
    # channels 0..3 drive the states, channel 4 the sensor
    G = np.zeros((4, 5))
    G[:, :4] = np.diag(noise.process_std)
    D = np.zeros((1, 5))
    D[0, 4] = noise.measurement_std
    return ContinuousModel(A=A, B=B, C=C, G=G, D=D)


def build_nominal_linear(p: ServoParams, noise: NoiseSpec = NoiseSpec(), T: float = 0.1) -> LinearModel:
    return discretize_zoh(continuous_linear(p, noise), T)
