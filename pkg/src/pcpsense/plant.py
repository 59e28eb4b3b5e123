"""Ground-truth simulator of the motor-gearbox-pump system under V/f control.

The electrical model is the same one used by the observer; the mechanics are
``J dω_m/dt = T_e - F ω_m - T_L`` and the discharge pressure is synthesised
from the pump angle as a harmonic series dominated by the second harmonic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import IntegrationDivergedError, InvalidParameterError
from .motor import (
    GearboxParams, MotorParams, VfLaw, derive_coefficients, electromagnetic_torque,
    output, steady_state, vf_voltage,
)

TWO_PI = 2 * math.pi


@dataclass
class PlantState:
    x: np.ndarray
    omega_m: float
    theta_m: float
    nu: float = 1.0

    @property
    def theta_p(self):
        return self.theta_m / self.nu

    @property
    def omega_p(self):
        return self.omega_m / self.nu


@dataclass(frozen=True)
class LoadModel:
    """Pump-shaft torque ``T_p = c0 + c1 * p_mean + c2 * omega_p``."""

    c0: float = 5.0
    c1: float = 8.0
    c2: float = 0.05

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(name, "must be nonnegative")

    def pump_torque(self, p_mean, omega_p):
        return self.c0 + self.c1 * p_mean + self.c2 * omega_p


@dataclass(frozen=True)
class PressureModel:
    """
    Discharge pressure as a harmonic series of the pump angle.

    ``amplitudes[k-1]`` and ``phases[k-1]`` belong to harmonic ``k``. The
    effective offset angle drifts linearly with mean pressure when
    ``offset_per_bar`` is nonzero.
    """

    amplitudes: tuple = (0.04, 0.30, 0.02, 0.06, 0.01, 0.015)
    phases: tuple = (0.3, 0.0, 1.1, 0.5, 2.0, 0.7)
    theta_off: float = 0.0
    noise_std: float = 0.0
    offset_per_bar: float = 0.0
    ref_pressure: float = 2.0

    def __post_init__(self):
        a = self.amplitudes
        if len(a) < 2 or len(self.phases) != len(a):
            raise InvalidParameterError("amplitudes", "need >= 2 harmonics and one phase per harmonic")
        if any(ak >= a[1] for k, ak in enumerate(a) if k != 1):
            raise InvalidParameterError("amplitudes", "second harmonic must dominate")
        if min(a) < 0:
            raise InvalidParameterError("amplitudes", "must be nonnegative")
        if self.noise_std < 0:
            raise InvalidParameterError("noise_std", "must be nonnegative")

    def offset(self, p_mean):
        return self.theta_off + self.offset_per_bar * (p_mean - self.ref_pressure)


@dataclass(frozen=True)
class ScenarioProfile:
    """
    Piecewise-constant operating schedule.

    ``omega_s_schedule`` and ``pressure_schedule`` are lists of
    ``(duration_s, value)``; the last pressure value is held if the pressure
    schedule is shorter than the speed schedule.
    """

    omega_s_schedule: tuple
    pressure_schedule: tuple
    sample_interval: float = 1e-3
    substeps: int = 4
    current_noise_std: float = 0.0
    start_at_equilibrium: bool = True

    def __post_init__(self):
        if self.sample_interval <= 0:
            raise InvalidParameterError("sample_interval", "must be positive")
        if self.substeps < 1:
            raise InvalidParameterError("substeps", "must be >= 1")
        for name in ("omega_s_schedule", "pressure_schedule"):
            for d, _ in getattr(self, name):
                if d <= 0:
                    raise InvalidParameterError(name, "durations must be positive")
        if not self.pressure_schedule and self.omega_s_schedule:
            raise InvalidParameterError("pressure_schedule", "must not be empty")

    @property
    def duration(self):
        return sum(d for d, _ in self.omega_s_schedule)

    @property
    def n_samples(self):
        return int(round(self.duration / self.sample_interval))

    def omega_s_at(self, t):
        return _schedule_value(self.omega_s_schedule, t)

    def pressure_at(self, t):
        return _schedule_value(self.pressure_schedule, t)

    def step_windows(self):
        """``(start, end)`` times of every speed step."""
        out, t0 = [], 0.0
        for d, _ in self.omega_s_schedule:
            out.append((t0, t0 + d))
            t0 += d
        return out


def _schedule_value(schedule, t):
    t_end = 0.0
    for d, v in schedule:
        t_end += d
        if t < t_end - 1e-12:
            return v
    return schedule[-1][1]


def staircase_profile(f_start=25.0, f_stop=45.0, f_step=5.0, hold=30.0,
                      pressures=(2.0, 2.7, 3.45, 4.2, 4.9), **kwargs):
    """Synchronous frequency staircase with one mean pressure per step."""
    freqs = np.arange(f_start, f_stop + 0.5 * f_step, f_step)
    if len(pressures) != len(freqs):
        raise InvalidParameterError("pressures", "need one pressure per frequency step")
    return ScenarioProfile(
        omega_s_schedule=tuple((hold, TWO_PI * f) for f in freqs),
        pressure_schedule=tuple((hold, float(p)) for p in pressures),
        **kwargs,
    )


def constant_profile(f_hz, p_mean, duration, **kwargs):
    return ScenarioProfile(((duration, TWO_PI * f_hz),), ((duration, p_mean),), **kwargs)


@dataclass
class Plant:
    """Bundles the models needed to advance :class:`PlantState`."""

    motor: MotorParams
    gearbox: GearboxParams
    vf: VfLaw
    load: LoadModel = field(default_factory=LoadModel)

    def __post_init__(self):
        self._g = derive_coefficients(self.motor)
        self._k_te = 1.5 * self.motor.z_p * (1 - self.motor.sigma) * self.motor.L_s

    def load_torque(self, omega_m, p_mean):
        """Motor-side load torque."""
        nu, eta = self.gearbox.nu, self.gearbox.eta
        return self.load.pump_torque(p_mean, omega_m / nu) / (eta * nu)

    def advance(self, state: PlantState, omega_s, p_mean, dt, n=1, t=0.0) -> PlantState:
        """``n`` classical RK4 steps of length ``dt`` with inputs held constant."""
        g1, g2, g3, g4 = self._g
        m = self.motor
        a = 1.0 / m.T_r
        zp, F, J, kte = m.z_p, m.F, m.J, self._k_te
        nu, eta = self.gearbox.nu, self.gearbox.eta
        ld = self.load
        # load torque is affine in omega_m: T_L = l0 + l1 * omega_m
        l0 = (ld.c0 + ld.c1 * p_mean) / (eta * nu)
        l1 = ld.c2 / (eta * nu * nu)
        ws = omega_s
        bu = g4 * vf_voltage(self.vf, omega_s)

        def f(x1, x2, x3, x4, wm):
            we = zp * wm
            slip = ws - we
            return (
                -g1 * x1 + ws * x2 + g2 * x3 + g3 * we * x4 + bu,
                -ws * x1 - g1 * x2 - g3 * we * x3 + g2 * x4,
                a * (x1 - x3) + slip * x4,
                a * (x2 - x4) - slip * x3,
                (kte * (x2 * x3 - x1 * x4) - F * wm - l0 - l1 * wm) / J,
            )

        x1, x2, x3, x4 = state.x
        wm, th = state.omega_m, state.theta_m
        h2, h6 = 0.5 * dt, dt / 6.0
        for _ in range(n):
            a1, b1, c1, d1, e1 = f(x1, x2, x3, x4, wm)
            a2, b2, c2, d2, e2 = f(x1 + h2 * a1, x2 + h2 * b1, x3 + h2 * c1, x4 + h2 * d1, wm + h2 * e1)
            a3, b3, c3, d3, e3 = f(x1 + h2 * a2, x2 + h2 * b2, x3 + h2 * c2, x4 + h2 * d2, wm + h2 * e2)
            a4, b4, c4, d4, e4 = f(x1 + dt * a3, x2 + dt * b3, x3 + dt * c3, x4 + dt * d3, wm + dt * e3)
            th += h6 * (wm + 2 * (wm + h2 * e1) + 2 * (wm + h2 * e2) + (wm + dt * e3))
            x1 += h6 * (a1 + 2 * a2 + 2 * a3 + a4)
            x2 += h6 * (b1 + 2 * b2 + 2 * b3 + b4)
            x3 += h6 * (c1 + 2 * c2 + 2 * c3 + c4)
            x4 += h6 * (d1 + 2 * d2 + 2 * d3 + d4)
            wm += h6 * (e1 + 2 * e2 + 2 * e3 + e4)
        if not all(map(math.isfinite, (x1, x2, x3, x4, wm, th))):
            raise IntegrationDivergedError(t + n * dt)
        return PlantState(np.array([x1, x2, x3, x4]), wm, th, state.nu)

    def step(self, state: PlantState, omega_s, p_mean, dt, t=0.0) -> PlantState:
        """One RK4 step."""
        return self.advance(state, omega_s, p_mean, dt, 1, t)

    def equilibrium(self, omega_s, p_mean, theta_m=0.0) -> PlantState:
        """Steady operating point: electrical equilibrium plus torque balance."""
        u = vf_voltage(self.vf, omega_s)
        m = self.motor

        def balance(wm):
            x = steady_state(m, omega_s, m.z_p * wm, u)
            return electromagnetic_torque(m, x) - m.F * wm - self.load_torque(wm, p_mean)

        w_sync = omega_s / m.z_p
        wm = brentq(balance, 0.5 * w_sync, w_sync, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        x = steady_state(m, omega_s, m.z_p * wm, u)
        return PlantState(x, wm, theta_m, self.gearbox.nu)


def plant_step(state: PlantState, omega_s, load: LoadModel, motor: MotorParams,
               gearbox: GearboxParams, vf: VfLaw, dt, p_mean=0.0, t=0.0) -> PlantState:
    """Functional form of :meth:`Plant.step`."""
    if not 0 < dt <= 2e-3:
        raise InvalidParameterError("dt", "must lie in (0, 2 ms]")
    return Plant(motor, gearbox, vf, load).step(state, omega_s, p_mean, dt, t)


def pressure_sample(theta_p, model: PressureModel, noise=0.0, p_mean=2.0):
    """Discharge pressure (bar) at pump angle ``theta_p``; ``noise`` is a standard-normal draw."""
    p_mean = np.asarray(p_mean, dtype=float)
    theta = np.asarray(theta_p, dtype=float) + model.offset(p_mean)
    p = np.zeros_like(theta) + p_mean
    for k, (a, phi) in enumerate(zip(model.amplitudes, model.phases), start=1):
        p = p + a * np.cos(k * theta + phi)
    p = p + model.noise_std * noise
    return p if p.ndim else float(p)


@dataclass
class ScenarioResult:
    """Measurements plus hidden truth, one row per sample."""

    t: np.ndarray
    p_D: np.ndarray
    i_eff: np.ndarray
    omega_s: np.ndarray
    theta_p: np.ndarray  # unwrapped
    omega_p: np.ndarray
    T_p: np.ndarray
    x: np.ndarray  # (n, 4)
    p_mean: np.ndarray
    theta_off: np.ndarray  # effective generator offset per sample

    def __len__(self):
        return len(self.t)

    @property
    def y(self):
        return output(self.x)


def run_scenario(profile: ScenarioProfile, plant: Plant, pressure: PressureModel,
                 seed=0) -> ScenarioResult:
    n = profile.n_samples
    Ts = profile.sample_interval
    h = Ts / profile.substeps
    rng = np.random.default_rng(seed)

    cols = {k: np.empty(n) for k in ("t", "omega_s", "theta_p", "omega_p", "T_p", "p_mean")}
    xs = np.empty((n, 4))
    if n == 0:
        return _finish(cols, xs, pressure, profile, rng)

    if profile.start_at_equilibrium:
        state = plant.equilibrium(profile.omega_s_at(0.0), profile.pressure_at(0.0))
    else:
        state = PlantState(np.zeros(4), 0.0, 0.0, plant.gearbox.nu)

    nu = plant.gearbox.nu
    for k in range(n):
        t = k * Ts
        ws = profile.omega_s_at(t)
        pm = profile.pressure_at(t)
        cols["t"][k] = t
        cols["omega_s"][k] = ws
        cols["p_mean"][k] = pm
        cols["theta_p"][k] = state.theta_m / nu
        cols["omega_p"][k] = state.omega_m / nu
        cols["T_p"][k] = plant.load.pump_torque(pm, state.omega_m / nu)
        xs[k] = state.x
        state = plant.advance(state, ws, pm, h, profile.substeps, t)
    return _finish(cols, xs, pressure, profile, rng)


def _finish(cols, xs, pressure, profile, rng):
    n = len(cols["t"])
    # fixed draw order keeps runs reproducible for a given seed
    p_noise = rng.standard_normal(n)
    i_noise = rng.standard_normal(n)
    p_D = np.atleast_1d(pressure_sample(cols["theta_p"], pressure, p_noise, cols["p_mean"]))
    i_eff = np.sqrt(output(xs)) + profile.current_noise_std * i_noise
    return ScenarioResult(
        t=cols["t"], p_D=p_D, i_eff=np.abs(i_eff), omega_s=cols["omega_s"],
        theta_p=cols["theta_p"], omega_p=cols["omega_p"], T_p=cols["T_p"], x=xs,
        p_mean=cols["p_mean"],
        theta_off=pressure.offset(cols["p_mean"]),
    )
