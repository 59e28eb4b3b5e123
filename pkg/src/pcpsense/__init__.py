"""Sensorless speed, angle and torque estimation for a motor-driven progressive cavity pump."""

from .config import RunConfig, load_config
from .ekf import EkfConfig, ekf_step, lyapunov_value, riccati_step, sign_monitor
from .errors import (
    CovarianceCollapseError, InsufficientDataError, IntegrationDivergedError,
    InvalidParameterError, ParseError, PcpSenseError,
)
from .estimator import SoftSensor
from .motor import MotorParams, bench_gearbox, bench_motor, bench_vf_law
from .plant import Plant, PressureModel, run_scenario, staircase_profile
from .pll import PllConfig, PressureTracker, calibrate_offset

__version__ = "0.1.0"

__all__ = [
    "CovarianceCollapseError", "EkfConfig", "InsufficientDataError", "IntegrationDivergedError",
    "InvalidParameterError", "MotorParams", "ParseError", "PcpSenseError", "Plant", "PllConfig",
    "PressureModel", "PressureTracker", "RunConfig", "SoftSensor", "bench_gearbox", "bench_motor",
    "bench_vf_law", "calibrate_offset", "ekf_step", "load_config", "lyapunov_value",
    "riccati_step", "run_scenario", "sign_monitor", "staircase_profile",
]
