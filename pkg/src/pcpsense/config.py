"""Run configuration loaded from TOML.

Sections: ``[motor] [gearbox] [vf] [scenario] [pll] [ekf] [estimator]``.
A key ending in ``_hz`` whose stem names an angular-frequency field is
converted to rad/s. Unknown keys are rejected.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .ekf import EkfConfig
from .errors import InvalidParameterError, ParseError
from .motor import GearboxParams, MotorParams, VfLaw, bench_gearbox, bench_motor, bench_vf_law
from .plant import (
    LoadModel, Plant, PressureModel, ScenarioProfile, constant_profile, staircase_profile,
)
from .pll import PllConfig, tune_loop

TWO_PI = 2 * math.pi

_MOTOR_KEYS = {"R_s", "R_r", "L_s", "L_r", "L_m", "z_p", "J", "F", "sigma"}
_GEARBOX_KEYS = {"nu", "eta"}
_VF_KEYS = {"rated_voltage", "rated_omega_s", "boost_voltage", "U_phase_rms"}
_SCENARIO_KEYS = {
    "kind", "seed", "f_start_hz", "f_stop_hz", "f_step_hz", "hold", "pressures",
    "omega_s", "p_mean", "duration", "sample_interval", "substeps",
    "pressure_noise_std", "current_noise_std", "harmonic_amplitudes", "harmonic_phases",
    "theta_off_deg", "offset_per_bar", "load_c0", "load_c1", "load_c2",
}
_PLL_KEYS = {"B_hz", "T", "A_v", "auto_tune", "theta_off_deg", "detector", "compensate",
             "lag_tau", "lock_window", "lock_threshold", "dc_tau"}
_EKF_KEYS = {"q_diag", "Q", "kappa", "delta", "x0_mode", "substeps", "max_substeps"}
_EST_KEYS = {"speed_tau", "deriv_tau", "summary_tau", "settle_window", "diagnostics"}
_ANGULAR = {"rated_omega_s", "omega_s"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulated operating schedule, pressure generator and load."""

    kind: str = "staircase"
    seed: int | None = None
    f_start_hz: float = 25.0
    f_stop_hz: float = 45.0
    f_step_hz: float = 5.0
    hold: float = 30.0
    pressures: tuple = (2.0, 2.7, 3.45, 4.2, 4.9)
    omega_s: float = TWO_PI * 35.0
    p_mean: float = 3.45
    duration: float = 30.0
    sample_interval: float = 1e-3
    substeps: int = 4
    pressure_noise_std: float = 0.01
    current_noise_std: float = 0.01
    pressure: PressureModel = field(default_factory=PressureModel)
    load: LoadModel = field(default_factory=LoadModel)

    def __post_init__(self):
        if self.kind not in ("staircase", "constant"):
            raise InvalidParameterError("scenario.kind", "must be 'staircase' or 'constant'")
        if self.seed is not None and (int(self.seed) != self.seed or self.seed < 0):
            raise InvalidParameterError("scenario.seed", "must be a nonnegative integer")
        for name in ("pressure_noise_std", "current_noise_std"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"scenario.{name}", "must be nonnegative")
        if not self.duration > 0 or not self.hold > 0:
            raise InvalidParameterError("scenario.duration", "must be positive")

    def profile(self) -> ScenarioProfile:
        kw = dict(sample_interval=self.sample_interval, substeps=self.substeps,
                  current_noise_std=self.current_noise_std)
        if self.kind == "constant":
            return constant_profile(self.omega_s / TWO_PI, self.p_mean, self.duration, **kw)
        return staircase_profile(self.f_start_hz, self.f_stop_hz, self.f_step_hz, self.hold,
                                 tuple(self.pressures), **kw)

    def pressure_model(self) -> PressureModel:
        return replace(self.pressure, noise_std=self.pressure_noise_std)


@dataclass(frozen=True)
class EstimatorConfig:
    speed_tau: float = 1.0
    deriv_tau: float = 0.5
    summary_tau: float = 0.5
    settle_window: float = 10.0
    x0_mode: str = "zero_slip"
    diagnostics: bool = False
    dc_tau: float = 2.0

    def __post_init__(self):
        for name in ("speed_tau", "deriv_tau", "summary_tau", "settle_window", "dc_tau"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"estimator.{name}", "must be positive")
        if self.x0_mode not in ("zero_slip", "zero"):
            raise InvalidParameterError("ekf.x0_mode", "must be 'zero_slip' or 'zero'")


@dataclass(frozen=True)
class RunConfig:
    motor: MotorParams = field(default_factory=bench_motor)
    gearbox: GearboxParams = field(default_factory=bench_gearbox)
    vf: VfLaw = field(default_factory=bench_vf_law)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    pll: PllConfig = field(default_factory=PllConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def plant(self) -> Plant:
        return Plant(self.motor, self.gearbox, self.vf, self.scenario.load)

    def with_seed(self, seed):
        return replace(self, scenario=replace(self.scenario, seed=seed))


def _section(data, name, allowed):
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise InvalidParameterError(name, "must be a table")
    out = {}
    for key, value in sec.items():
        stem = key[:-3] if key.endswith("_hz") else None
        if stem in _ANGULAR and stem in allowed:
            out[stem] = float(value) * TWO_PI
        elif key in allowed:
            out[key] = value
        else:
            raise InvalidParameterError(f"{name}.{key}", "unknown key")
    return out


def _motor(d):
    if not d:
        return bench_motor()
    base = bench_motor()
    kw = {k: d.get(k, getattr(base, k)) for k in ("R_s", "R_r", "L_s", "L_r", "L_m", "z_p", "J", "F")}
    kw["z_p"] = int(kw["z_p"]) if float(kw["z_p"]).is_integer() else kw["z_p"]
    return MotorParams(**kw, sigma_override=d.get("sigma"))


def _vf(d):
    if not d:
        return bench_vf_law()
    base = bench_vf_law()
    if "U_phase_rms" in d:
        if "rated_voltage" in d:
            raise InvalidParameterError("vf", "give either U_phase_rms or rated_voltage")
        d = dict(d, rated_voltage=math.sqrt(2) * d.pop("U_phase_rms"))
    return VfLaw(d.get("rated_voltage", base.rated_voltage),
                 d.get("rated_omega_s", base.rated_omega_s),
                 d.get("boost_voltage", base.boost_voltage))


def _scenario(d):
    base = ScenarioConfig()
    pkw = {}
    if "harmonic_amplitudes" in d:
        pkw["amplitudes"] = tuple(float(a) for a in d.pop("harmonic_amplitudes"))
    if "harmonic_phases" in d:
        pkw["phases"] = tuple(float(a) for a in d.pop("harmonic_phases"))
    if "theta_off_deg" in d:
        pkw["theta_off"] = math.radians(d.pop("theta_off_deg"))
    if "offset_per_bar" in d:
        pkw["offset_per_bar"] = d.pop("offset_per_bar")
    lkw = {f"c{i}": d.pop(f"load_c{i}") for i in range(3) if f"load_c{i}" in d}
    if "pressures" in d:
        d["pressures"] = tuple(float(p) for p in d["pressures"])
    return replace(base, pressure=replace(base.pressure, **pkw),
                   load=replace(base.load, **lkw), **d)


def _pll(d):
    auto = d.pop("auto_tune", True)
    if "theta_off_deg" in d:
        d["theta_off"] = math.radians(d.pop("theta_off_deg"))
    d.pop("dc_tau", None)
    cfg = PllConfig(**d)
    if auto and cfg.A_v is not None and not math.isclose(cfg.A_v, tune_loop(cfg.T)):
        raise InvalidParameterError("pll.A_v", "conflicts with auto_tune = true")
    if not auto and cfg.A_v is None:
        raise InvalidParameterError("pll.A_v", "required when auto_tune = false")
    return cfg


def _ekf(d):
    d.pop("x0_mode", None)
    if "q_diag" in d and "Q" in d:
        raise InvalidParameterError("ekf.Q", "give either q_diag or Q")
    if "q_diag" in d:
        q = np.asarray(d.pop("q_diag"), dtype=float)
        if q.shape != (4,):
            raise InvalidParameterError("ekf.q_diag", "needs four entries")
        d["Q"] = np.diag(q)
    elif "Q" in d:
        d["Q"] = np.asarray(d["Q"], dtype=float)
    return EkfConfig(**d)


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed TOML."""
    unknown = set(data) - {"motor", "gearbox", "vf", "scenario", "pll", "ekf", "estimator"}
    if unknown:
        raise InvalidParameterError(sorted(unknown)[0], "unknown section")
    try:
        motor = _motor(_section(data, "motor", _MOTOR_KEYS))
        gearbox = GearboxParams(**_section(data, "gearbox", _GEARBOX_KEYS)) if "gearbox" in data \
            else bench_gearbox()
        vf = _vf(_section(data, "vf", _VF_KEYS))
        scenario = _scenario(_section(data, "scenario", _SCENARIO_KEYS))
        pll_raw = _section(data, "pll", _PLL_KEYS)
        ekf_raw = _section(data, "ekf", _EKF_KEYS)
        est = _section(data, "estimator", _EST_KEYS)
        if "x0_mode" in ekf_raw:
            est["x0_mode"] = ekf_raw["x0_mode"]
        if "dc_tau" in pll_raw:
            est["dc_tau"] = pll_raw["dc_tau"]
        return RunConfig(motor, gearbox, vf, scenario, _pll(pll_raw), _ekf(ekf_raw),
                         EstimatorConfig(**est))
    except TypeError as exc:  # wrong value types reaching a dataclass
        raise InvalidParameterError("config", str(exc)) from None


def load_config(path) -> RunConfig:
    """Read a TOML file. ``None`` gives the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(Path(path), "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(data)
