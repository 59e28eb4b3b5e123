"""End-to-end soft sensor: pressure -> PLL -> speed/angle; current -> EKF -> torque."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ekf import (
    EkfConfig, TorqueReconstructor, ekf_step, initial_state, sign_monitor,
)
from .motor import (
    GearboxParams, MotorParams, VfLaw, derive_coefficients, input_vector, system_matrix,
    vf_voltage,
)
from .pll import PllConfig, PressureTracker


@dataclass
class EstimateRecord:
    t: float
    theta_p: float
    omega_p: float
    T_p: float
    y_hat: float
    lock: bool
    sign_ok: bool


@dataclass
class Diagnostics:
    x_hat: np.ndarray
    T_e: float
    theta_pD: float
    omega_p_smooth: float
    p_min_eig: float
    P: np.ndarray


class SoftSensor:
    """
    Streaming estimator fed one sample at a time.

    The observer's electrical speed is ``z_p nu omega_p`` computed from the
    smoothed PLL frequency (``z_p nu = 2`` reproduces ``omega_e = 2 omega_p``).
    """

    def __init__(self, motor: MotorParams, gearbox: GearboxParams, vf: VfLaw,
                 pll: PllConfig | None = None, ekf: EkfConfig | None = None, dt=1e-3,
                 deriv_tau=0.5, speed_tau=1.0, dc_tau=2.0, x0_mode="zero_slip"):
        self.motor, self.gearbox, self.vf = motor, gearbox, vf
        self.pll_cfg = pll or PllConfig()
        self.ekf_cfg = ekf or EkfConfig()
        self.dt = dt
        self.dc_tau, self.x0_mode = dc_tau, x0_mode
        self._g = derive_coefficients(motor)
        self._B = input_vector(self._g)
        self.torque = TorqueReconstructor(motor, gearbox, dt, deriv_tau)
        self.tracker = None
        self.ekf = None
        self._a_speed = 1.0 - math.exp(-dt / speed_tau)
        self._w_smooth = None

    def _start(self, omega_s):
        self.tracker = PressureTracker(self.pll_cfg, self.motor.z_p, self.gearbox.nu,
                                       self.dt, omega_s0=omega_s, dc_tau=self.dc_tau)
        u = vf_voltage(self.vf, omega_s)
        x0 = np.zeros(4) if self.x0_mode == "zero" else None
        self.ekf = initial_state(self.ekf_cfg, self.motor, omega_s, u, x0)

    def step(self, t, p_D, i_eff, omega_s):
        if self.tracker is None:
            self._start(omega_s)
        theta_p, omega_p, locked = self.tracker.step(p_D, omega_s)
        if self._w_smooth is None:
            self._w_smooth = omega_p
        self._w_smooth += self._a_speed * (omega_p - self._w_smooth)
        w_smooth = self._w_smooth
        omega_e = self.motor.z_p * self.gearbox.nu * w_smooth
        A = system_matrix(self._g, self.motor.T_r, omega_s, omega_e)
        u = vf_voltage(self.vf, omega_s)
        x_prev = self.ekf.x
        self.ekf = ekf_step(self.ekf, u, i_eff * i_eff, A, self._B, self.ekf_cfg, self.dt)
        tq = self.torque.step(x_prev, w_smooth)
        rec = EstimateRecord(
            t=t, theta_p=theta_p, omega_p=omega_p, T_p=tq.T_p,
            y_hat=0.5 * (x_prev[0] ** 2 + x_prev[1] ** 2), lock=locked,
            sign_ok=sign_monitor(x_prev).ok,
        )
        diag = Diagnostics(x_prev, tq.T_e, self.tracker.pll.state.theta_pD, w_smooth,
                           self.ekf.min_eig, self.ekf.P)
        return rec, diag

    @classmethod
    def from_config(cls, cfg, dt=None):
        """Build from a :class:`~pcpsense.config.RunConfig`."""
        e = cfg.estimator
        return cls(cfg.motor, cfg.gearbox, cfg.vf, cfg.pll, cfg.ekf,
                   dt=cfg.scenario.sample_interval if dt is None else dt,
                   deriv_tau=e.deriv_tau, speed_tau=e.speed_tau, dc_tau=e.dc_tau,
                   x0_mode=e.x0_mode)
