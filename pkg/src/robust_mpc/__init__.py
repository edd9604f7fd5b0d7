"""Unconstrained MPC with a KL-ball robust Kalman filter, plus a nonlinear servo benchmark."""

from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    IllPosedProblem,
    ModelConstructionError,
    NumericalFailure,
    RobustMPCError,
)
from .kalman import FilterState, kf_init, kf_predict, kf_run, kf_step, kf_update
from .mpc import MpcConfig, MpcSolution, PredictionMatrices, build_prediction, solve_mpc, stack_reference
from .robust_kalman import RobustFilterState, gamma, rkf_init, rkf_run, rkf_step, solve_theta
from .servo import (
    NoiseSpec,
    PlantState,
    ServoParams,
    build_nominal_linear,
    friction_torque,
    nominal_params,
    perturbed_params,
    plant_derivative,
    simulate_plant_step,
)
from .sim import Scenario, ScenarioResult, compare_controllers, run_scenario, square_wave
from .statespace import (
    ContinuousModel,
    GaussianBelief,
    LinearModel,
    discretize_zoh,
    matrix_exponential,
    psd_project,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "IllPosedProblem",
    "ModelConstructionError",
    "NumericalFailure",
    "RobustMPCError",
    "FilterState",
    "kf_init",
    "kf_predict",
    "kf_run",
    "kf_step",
    "kf_update",
    "MpcConfig",
    "MpcSolution",
    "PredictionMatrices",
    "build_prediction",
    "solve_mpc",
    "stack_reference",
    "RobustFilterState",
    "gamma",
    "rkf_init",
    "rkf_run",
    "rkf_step",
    "solve_theta",
    "NoiseSpec",
    "PlantState",
    "ServoParams",
    "build_nominal_linear",
    "friction_torque",
    "nominal_params",
    "perturbed_params",
    "plant_derivative",
    "simulate_plant_step",
    "Scenario",
    "ScenarioResult",
    "compare_controllers",
    "run_scenario",
    "square_wave",
    "ContinuousModel",
    "GaussianBelief",
    "LinearModel",
    "discretize_zoh",
    "matrix_exponential",
    "psd_project",
]

__version__ = "0.1.0"
