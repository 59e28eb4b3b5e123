"""Continuous-time extended Kalman filter for the motor currents and fluxes.

The scalar measurement is the squared effective current
``y = i_eff² = (x1² + x2²)/2`` with Jacobian ``C = [x1, x2, 0, 0]``. State and
Riccati equation are integrated together with fixed-step RK4, inputs held
constant over a sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import CovarianceCollapseError, IntegrationDivergedError, InvalidParameterError
from .motor import GearboxParams, MotorParams, electromagnetic_torque, gearbox_map, steady_state


def _check_pd(P, t):
    """Return the smallest eigenvalue of ``P``; raise if it is not positive."""
    min_eig = float(np.linalg.eigvalsh(P)[0])
    if not min_eig > 0:
        raise CovarianceCollapseError(t, min_eig)
    return min_eig


@dataclass(frozen=True, eq=False)
class EkfConfig:
    """
    Observer tuning.

    ``Q`` is the process-noise matrix, ``R = kappa`` (scalar measurement),
    ``P(0) = delta I``. ``substeps`` is the minimum number of RK4 steps per
    sample interval; more are taken (up to ``max_substeps``) while the gain
    term ``tr(P) |C|^2 / kappa`` is stiff relative to the step.
    """

    Q: np.ndarray = field(default_factory=lambda: np.diag([100.0, 100.0, 1.0, 1.0]))
    kappa: float = 0.1
    delta: float = 1.0
    substeps: int = 1
    max_substeps: int = 64

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        if Q.shape != (4, 4) or not np.all(np.isfinite(Q)):
            raise InvalidParameterError("Q", "must be a finite 4x4 matrix")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise InvalidParameterError("Q", "must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise InvalidParameterError("Q", "must be positive definite")
        if not self.kappa > 0:
            raise InvalidParameterError("kappa", "R = kappa must be positive")
        if not self.delta > 0:
            raise InvalidParameterError("delta", "must be positive")
        if self.substeps < 1:
            raise InvalidParameterError("substeps", "must be >= 1")
        if self.max_substeps < self.substeps:
            raise InvalidParameterError("max_substeps", "must be >= substeps")

    def __eq__(self, other):
        if not isinstance(other, EkfConfig):
            return NotImplemented
        return (np.array_equal(self.Q, other.Q) and self.kappa == other.kappa
                and self.delta == other.delta and self.substeps == other.substeps
                and self.max_substeps == other.max_substeps)

    __hash__ = None


@dataclass
class EkfState:
    x: np.ndarray
    P: np.ndarray
    K: np.ndarray = field(default_factory=lambda: np.zeros(4))
    t: float = 0.0
    min_eig: float | None = None

    def __post_init__(self):
        if self.min_eig is None:
            self.min_eig = float(np.linalg.eigvalsh(self.P)[0])

    @property
    def y_hat(self):
        return 0.5 * (self.x[0] ** 2 + self.x[1] ** 2)


def initial_state(cfg: EkfConfig, motor: MotorParams, omega_s, u, x0=None) -> EkfState:
    """Start from ``x0`` or from the zero-slip equilibrium at ``omega_s``."""
    if x0 is None:
        x0 = steady_state(motor, omega_s, omega_s, u)
    return EkfState(np.array(x0, dtype=float), cfg.delta * np.eye(4))


def output_jacobian(x):
    return np.array([x[0], x[1], 0.0, 0.0])


def riccati_rhs(P, A, C, Q, kappa):
    PC = P @ C
    AP = A @ P
    return AP + AP.T - PC[:, None] * PC[None, :] / kappa + Q


def riccati_step(P, A, C, Q, kappa, dt, t=0.0):
    """One RK4 step of the Riccati equation with ``A`` and ``C`` frozen; returns ``(P, K)``."""
    k1 = riccati_rhs(P, A, C, Q, kappa)
    k2 = riccati_rhs(P + 0.5 * dt * k1, A, C, Q, kappa)
    k3 = riccati_rhs(P + 0.5 * dt * k2, A, C, Q, kappa)
    k4 = riccati_rhs(P + dt * k3, A, C, Q, kappa)
    Pn = P + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    Pn = 0.5 * (Pn + Pn.T)
    _check_pd(Pn, t + dt)
    return Pn, Pn @ C / kappa


def _rhs(x, P, A, Bu, y, Q, kappa, C_fixed):
    if C_fixed is None:
        x1, x2 = x[0], x[1]
        C = np.array([x1, x2, 0.0, 0.0])
        y_hat = 0.5 * (x1 * x1 + x2 * x2)
    else:
        C = C_fixed
        y_hat = C @ x
    PC = P @ C
    K = PC / kappa
    dx = A @ x + Bu + K * (y - y_hat)
    AP = A @ P
    dP = AP + AP.T - PC[:, None] * (PC / kappa)[None, :] + Q
    return dx, dP


def ekf_step(s: EkfState, u, y, A, B, cfg: EkfConfig, dt, C_fixed=None) -> EkfState:
    """
    Advance the observer by one sample interval.

    ``u`` and ``y`` are held constant. ``C_fixed`` switches to a linear
    measurement ``y = C_fixed @ x`` (used for reference comparisons).
    """
    if y < 0 and C_fixed is None:
        raise InvalidParameterError("y", "squared current must be nonnegative")
    x, P = s.x, s.P
    Bu = B * u
    Q, kappa = cfg.Q, cfg.kappa
    # Gain-term stiffness, with |C| inflated by the move the innovation can cause.
    if C_fixed is None:
        c = math.hypot(x[0], x[1])
        trP = np.trace(P)
        c += dt * trP * c * abs(y - 0.5 * c * c) / kappa
    else:
        c = float(np.linalg.norm(C_fixed))
        trP = np.trace(P)
    stiff = dt * trP * c * c / kappa
    n = min(max(cfg.substeps, math.ceil(stiff)), cfg.max_substeps)
    h = dt / n
    for _ in range(n):
        dx1, dP1 = _rhs(x, P, A, Bu, y, Q, kappa, C_fixed)
        dx2, dP2 = _rhs(x + 0.5 * h * dx1, P + 0.5 * h * dP1, A, Bu, y, Q, kappa, C_fixed)
        dx3, dP3 = _rhs(x + 0.5 * h * dx2, P + 0.5 * h * dP2, A, Bu, y, Q, kappa, C_fixed)
        dx4, dP4 = _rhs(x + h * dx3, P + h * dP3, A, Bu, y, Q, kappa, C_fixed)
        x = x + h / 6.0 * (dx1 + 2 * dx2 + 2 * dx3 + dx4)
        P = P + h / 6.0 * (dP1 + 2 * dP2 + 2 * dP3 + dP4)
        P = 0.5 * (P + P.T)
    t = s.t + dt
    if not np.all(np.isfinite(x)):
        raise IntegrationDivergedError(t, "observer state became non-finite")
    min_eig = _check_pd(P, t)
    C = output_jacobian(x) if C_fixed is None else C_fixed
    return EkfState(x, P, P @ C / kappa, t, min_eig)


# --------------------------------------------------------------------------
# torque reconstruction

@dataclass
class TorqueEstimate:
    T_e: float
    inertial: float  # J d(omega_m)/dt
    T_L: float  # motor side
    T_p: float  # pump side


class TorqueReconstructor:
    """
    Pump torque from the electrical estimate and the speed estimate.

    The speed derivative is a first difference smoothed by a first-order
    low-pass with time constant ``deriv_tau``.
    """

    def __init__(self, motor: MotorParams, gearbox: GearboxParams, dt=1e-3, deriv_tau=0.5):
        self.motor, self.gearbox, self.dt = motor, gearbox, dt
        self._a = 1.0 - math.exp(-dt / deriv_tau)
        self._w_prev = None
        self.dw = 0.0

    def step(self, x_hat, omega_p_hat) -> TorqueEstimate:
        m = self.motor
        w_m = self.gearbox.nu * omega_p_hat
        if self._w_prev is not None:
            self.dw += self._a * ((w_m - self._w_prev) / self.dt - self.dw)
        self._w_prev = w_m
        T_e = float(electromagnetic_torque(m, x_hat))
        inertial = m.J * self.dw
        T_L = T_e - m.F * w_m - inertial
        _, T_p = gearbox_map(w_m, T_L, self.gearbox)
        return TorqueEstimate(T_e, inertial, T_L, T_p)


def torque_outputs(x_hat, omega_p_hat, motor: MotorParams, gearbox: GearboxParams,
                   dt=1e-3, deriv_tau=0.5):
    """Batch form of :class:`TorqueReconstructor`; returns arrays ``(T_e, inertial, T_L, T_p)``."""
    rec = TorqueReconstructor(motor, gearbox, dt, deriv_tau)
    out = [rec.step(x, w) for x, w in zip(np.atleast_2d(x_hat), np.atleast_1d(omega_p_hat))]
    return tuple(np.array([getattr(o, f) for o in out]) for f in ("T_e", "inertial", "T_L", "T_p"))


# --------------------------------------------------------------------------
# convergence diagnostics

@dataclass(frozen=True)
class SignDiagnostic:
    ok: bool
    inner: float | None = None

    @property
    def status(self):
        return "PASS" if self.ok else "WARN"


def sign_monitor(x_hat, x_true=None) -> SignDiagnostic:
    """
    Check the sign condition behind the observer's convergence argument.

    Without truth: ``i_sd > 0`` and ``i_sq < 0`` (voltage-frame current lags
    the voltage by less than 90 degrees). With truth: the current vectors
    have a nonnegative inner product.
    """
    if x_true is None:
        return SignDiagnostic(bool(x_hat[0] > 0 and x_hat[1] < 0))
    inner = float(x_hat[0] * x_true[0] + x_hat[1] * x_true[1])
    return SignDiagnostic(inner >= 0, inner)


def convergence_term(x_hat, x_true):
    """
    ``(x̂·e)(x·e)`` over the current components, ``e = x - x̂``.

    ``dV/dt = -e' P^-1 Q P^-1 e - convergence_term / kappa`` holds exactly for
    the quadratic measurement, so a nonnegative value is sufficient for
    decrease. A positive inner product ``x̂·x`` alone does not guarantee it.
    """
    e1, e2 = x_true[0] - x_hat[0], x_true[1] - x_hat[1]
    return float((x_hat[0] * e1 + x_hat[1] * e2) * (x_true[0] * e1 + x_true[1] * e2))


def lyapunov_value(e, P, t=0.0):
    """``e^T P^-1 e`` via a Cholesky solve."""
    try:
        c = cho_factor(P)
    except np.linalg.LinAlgError:
        raise CovarianceCollapseError(t, float(np.linalg.eigvalsh(P).min())) from None
    e = np.asarray(e, dtype=float)
    return float(e @ cho_solve(c, e))
