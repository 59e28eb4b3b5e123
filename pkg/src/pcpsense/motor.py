"""Induction motor, V/f law and gearbox model.

The electrical state is expressed in a synchronous d-q frame whose d axis is
locked to the stator voltage vector, so ``u_sd = |u_s|`` and ``u_sq = 0``::

    x = [i_sd, i_sq, psi_rd / L_m, psi_rq / L_m]

All functions here are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError


def _require(cond, field, message):
    if not cond:
        raise InvalidParameterError(field, message)


def _finite(value, field):
    _require(np.all(np.isfinite(value)), field, "must be finite")


@dataclass(frozen=True)
class MotorParams:
    """
    Electrical and mechanical induction motor constants.

    Parameters
    ----------
    R_s, R_r : float
        Stator and rotor resistance (Ω).
    L_s, L_r, L_m : float
        Stator, rotor and mutual inductance (H).
    z_p : int
        Number of pole pairs.
    J : float
        Shaft moment of inertia referred to the motor side (kg m²).
    F : float
        Viscous friction coefficient (N m s/rad).
    sigma_override : float, optional
        Use this leakage coefficient instead of ``1 - L_m²/(L_s L_r)``.
    """

    R_s: float
    R_r: float
    L_s: float
    L_r: float
    L_m: float
    z_p: int = 2
    J: float = 0.017
    F: float = 7.69e-4
    sigma_override: float | None = None

    def __post_init__(self):
        for name in ("R_s", "R_r", "L_s", "L_r", "L_m", "J", "F"):
            _finite(getattr(self, name), name)
        for name in ("R_s", "R_r", "L_s", "L_r", "L_m", "J"):
            _require(getattr(self, name) > 0, name, "must be strictly positive")
        _require(self.F >= 0, "F", "must be nonnegative")
        _require(int(self.z_p) == self.z_p and self.z_p >= 1, "z_p", "must be an integer >= 1")
        if self.sigma_override is not None:
            _require(0 < self.sigma_override < 1, "sigma_override", "must lie in (0, 1)")
        else:
            sigma = 1.0 - self.L_m**2 / (self.L_s * self.L_r)
            _require(0 < sigma < 1, "L_m", f"leakage coefficient {sigma:.3g} outside (0, 1)")

    @property
    def sigma(self):
        if self.sigma_override is not None:
            return float(self.sigma_override)
        return 1.0 - self.L_m**2 / (self.L_s * self.L_r)

    @property
    def T_s(self):
        return self.L_s / self.R_s

    @property
    def T_r(self):
        return self.L_r / self.R_r


class Gammas(NamedTuple):
    """Model coefficients (1/s, 1/s, -, 1/H)."""

    g1: float
    g2: float
    g3: float
    g4: float


@dataclass(frozen=True)
class GearboxParams:
    """Transmission ratio ``nu`` (motor speed / pump speed) and efficiency ``eta``."""

    nu: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        _finite(self.nu, "nu")
        _finite(self.eta, "eta")
        _require(self.nu > 0, "nu", "must be positive")
        _require(0 < self.eta <= 1, "eta", "must lie in (0, 1]")


@dataclass(frozen=True)
class VfLaw:
    """
    Open-loop V/f table of the inverter.

    ``rated_voltage`` is the peak space-vector magnitude at ``rated_omega_s``;
    below ``boost_voltage`` the output is clamped to the boost level.
    """

    rated_voltage: float
    rated_omega_s: float
    boost_voltage: float = 0.0

    def __post_init__(self):
        _require(self.rated_voltage > 0, "rated_voltage", "must be positive")
        _require(self.rated_omega_s > 0, "rated_omega_s", "must be positive")
        _require(self.boost_voltage >= 0, "boost_voltage", "must be nonnegative")

    @classmethod
    def from_nameplate(cls, U_phase_rms, f_n, scale=math.sqrt(2), boost_voltage=0.0):
        """Build the law from phase RMS voltage and rated frequency in Hz."""
        return cls(scale * U_phase_rms, 2 * math.pi * f_n, boost_voltage)


def bench_motor(J=0.017, sigma_override=None):
    """Parameters of the 4 kW, 4-pole laboratory motor."""
    return MotorParams(
        R_s=1.16, R_r=1.16, L_s=0.21, L_r=0.21, L_m=0.2,
        z_p=2, J=J, F=7.69e-4, sigma_override=sigma_override,
    )


def bench_gearbox():
    return GearboxParams(nu=2.94, eta=0.96)


def bench_vf_law():
    return VfLaw.from_nameplate(230.0, 50.0)


def derive_coefficients(p: MotorParams) -> Gammas:
    sigma, T_s, T_r = p.sigma, p.T_s, p.T_r
    g2 = (1 - sigma) / (sigma * T_r)
    g1 = 1 / (sigma * T_s) + g2
    g3 = (1 - sigma) / sigma
    g4 = 1 / (sigma * p.L_s)
    return Gammas(g1, g2, g3, g4)


def system_matrix(g: Gammas, T_r, omega_s, omega_e):
    """State matrix ``A(t)`` at synchronous speed ``omega_s`` and electrical speed ``omega_e``."""
    _finite([*g, T_r, omega_s, omega_e], "system_matrix input")
    g1, g2, g3, _ = g
    a = 1.0 / T_r
    slip = omega_s - omega_e
    return np.array([
        [-g1, omega_s, g2, g3 * omega_e],
        [-omega_s, -g1, -g3 * omega_e, g2],
        [a, 0.0, -a, slip],
        [0.0, a, -slip, -a],
    ])


def input_vector(g: Gammas):
    return np.array([g.g4, 0.0, 0.0, 0.0])


def electromagnetic_torque(p: MotorParams, x):
    """Air-gap torque (N m) of state ``x``; vectorised over a trailing axis of length 4."""
    x = np.asarray(x, dtype=float)
    k = 1.5 * p.z_p * (1 - p.sigma) * p.L_s
    return k * (x[..., 1] * x[..., 2] - x[..., 0] * x[..., 3])


def output(x):
    """Squared effective current ``i_eff² = (i_sd² + i_sq²)/2``."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2)


def steady_state(p: MotorParams, omega_s, omega_e, u):
    """Electrical equilibrium ``A x + B u = 0`` for fixed speeds."""
    g = derive_coefficients(p)
    A = system_matrix(g, p.T_r, omega_s, omega_e)
    return np.linalg.solve(A, -input_vector(g) * u)


def gearbox_map(omega_m, T_L, g: GearboxParams):
    """Motor-side speed and load torque to pump-side speed and torque."""
    return omega_m / g.nu, g.eta * g.nu * T_L


def gearbox_unmap(omega_p, T_p, g: GearboxParams):
    """Inverse of :func:`gearbox_map`."""
    return omega_p * g.nu, T_p / (g.eta * g.nu)


def vf_voltage(law: VfLaw, omega_s):
    if omega_s < 0:
        raise InvalidParameterError("omega_s", "negative synchronous speed (single rotation direction)")
    u = law.rated_voltage * omega_s / law.rated_omega_s
    return max(u, law.boost_voltage)


def pressure_center(omega_s, z_p, nu):
    """Expected frequency of the second pressure harmonic, ``2 omega_s / (z_p nu)``."""
    return 2.0 * omega_s / (z_p * nu)
