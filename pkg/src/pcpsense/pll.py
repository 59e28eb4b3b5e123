"""Rotor position and speed from the discharge-pressure pulsation.

The pressure signal is band-pass filtered around the expected frequency of its
second harmonic and tracked by a phase-locked loop with loop filter
``F(s) = 1/(T s + 1)`` and gain ``A_v``. Phase convention: the tracked
component is ``a cos(theta_pD)`` and ``theta_p = theta_pD / 2 - theta_off``.
"""
from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError

TWO_PI = 2 * math.pi


def wrap_2pi(a):
    """Wrap angles to [0, 2 pi)."""
    r = np.asarray(a) % TWO_PI
    # a tiny negative input rounds up to exactly 2 pi
    return np.where(r >= TWO_PI, 0.0, r)


def wrap_pi(a):
    """Wrap angles to [-pi, pi)."""
    return wrap_2pi(np.asarray(a) + math.pi) - math.pi


def _wrap2pi_scalar(a):
    r = a % TWO_PI
    return 0.0 if r >= TWO_PI else r


# --------------------------------------------------------------------------
# band-pass filter

def analog_response(omega, omega_c, B):
    """``G_F(j omega) = 2 pi B j omega / (omega_c² - omega² + 2 pi B j omega)``."""
    beta = TWO_PI * B
    jw = 1j * np.asarray(omega, dtype=float)
    return beta * jw / (jw**2 + beta * jw + omega_c**2)


def filter_phase(omega, omega_c, B):
    """Phase of the analog band-pass, ``pi/2 - atan(2 pi B omega / (omega_c² - omega²))``.

    Uses ``atan2`` so the result is continuous through the centre frequency.
    """
    omega = np.asarray(omega, dtype=float)
    return math.pi / 2 - np.arctan2(TWO_PI * B * omega, omega_c**2 - omega**2)


def _prewarp(omega_c, B, dt):
    x = 0.5 * omega_c * dt
    h = 2.0 * math.tan(x) / omega_c
    beta = TWO_PI * B * (2 * x / math.sin(2 * x))
    return h, beta


def discrete_response(omega, omega_c, B, dt):
    """Frequency response of the discretised band-pass at ``exp(j omega dt)``."""
    h, beta = _prewarp(omega_c, B, dt)
    s = 1j * (2.0 / h) * np.tan(0.5 * np.asarray(omega, dtype=float) * dt)
    return beta * s / (s**2 + beta * s + omega_c**2)


@dataclass
class Bandpass:
    """
    Second-order band-pass with a movable centre frequency.

    Realised as ``v' = beta (u - v) - omega_c q``, ``q' = omega_c v`` whose
    ``u -> v`` transfer function is ``G_F``; ``q`` lags ``v`` by 90 degrees and
    supplies a quadrature signal. Discretised with the trapezoidal rule,
    prewarped so the centre frequency maps exactly. Changing the centre keeps
    the states and only rebuilds the coefficients.
    """

    B: float
    v: float = 0.0
    q: float = 0.0
    u_prev: float | None = None
    omega_c: float | None = None
    _key: tuple | None = None
    _coef: tuple | None = None

    def __post_init__(self):
        if not self.B > 0:
            raise InvalidParameterError("B_hz", "bandwidth must be positive")

    def _coefficients(self, omega_c, dt):
        key = (omega_c, dt)
        if key != self._key:
            h, beta = _prewarp(omega_c, self.B, dt)
            a, w = 0.5 * h * beta, 0.5 * h * omega_c
            # (I - h/2 A)^-1 for A = [[-beta, -w0], [w0, 0]]
            det = (1 + a) + w * w
            m11, m12, m21, m22 = 1 / det, -w / det, w / det, (1 + a) / det
            # N = I + h/2 A
            n11, n12, n21, n22 = 1 - a, -w, w, 1.0
            self._coef = (
                m11 * n11 + m12 * n21, m11 * n12 + m12 * n22,
                m21 * n11 + m22 * n21, m21 * n12 + m22 * n22,
                m11 * a, m21 * a,
            )
            self._key = key
        return self._coef

    def step(self, u, omega_c, dt):
        """Advance one sample; returns the filtered value ``v``."""
        if not (dt > 0 and omega_c > 0):
            raise InvalidParameterError("omega_c", "dt and centre frequency must be positive")
        if self.u_prev is None:
            self.u_prev = u
        d11, d12, d21, d22, b1, b2 = self._coefficients(omega_c, dt)
        us = self.u_prev + u
        v, q = self.v, self.q
        self.v = d11 * v + d12 * q + b1 * us
        self.q = d21 * v + d22 * q + b2 * us
        self.u_prev = u
        self.omega_c = omega_c
        return self.v

    def quadrature(self, omega):
        """``q`` rescaled to the magnitude of ``v`` for a sinusoid at ``omega``."""
        return self.q * omega / self.omega_c

    def amplitude_phase(self, omega):
        """Amplitude and phase of the filtered sinusoid assuming frequency ``omega``."""
        qs = self.quadrature(omega)
        return math.hypot(self.v, qs), math.atan2(qs, self.v)


def bandpass_step(state: Bandpass, p_D, omega_c, dt):
    """Functional wrapper: returns ``(state, filtered_value)``."""
    y = state.step(p_D, omega_c, dt)
    return state, y


# --------------------------------------------------------------------------
# loop design

def tune_loop(T):
    """Loop gain giving damping sqrt(2)/2 for characteristic polynomial ``T s² + s + A_v``."""
    if not T > 0:
        raise InvalidParameterError("T", "must be positive")
    return 1.0 / (2.0 * T)


def damping(A_v, T):
    return 1.0 / (2.0 * math.sqrt(A_v * T))


def default_bandwidth(nominal_slip_speed, factor=2.0):
    """Band-pass width (Hz) from the nominal slip speed (rad/s)."""
    return factor * nominal_slip_speed / TWO_PI


@dataclass(frozen=True)
class PllConfig:
    """
    Loop parameters.

    ``A_v`` defaults to the auto-tuned value for ``T``. ``B_hz`` is the
    band-pass width. ``lag_tau`` smooths the loop-filter output and the
    frequency used for the static-lag and filter-phase corrections.
    """

    T: float = 0.1
    A_v: float | None = None
    B_hz: float = 4.0
    theta_off: float = 0.0
    compensate: bool = True
    detector: str = "quadrature"
    lag_tau: float = 0.1
    lock_window: float = 1.0
    lock_threshold: float = 0.05

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidParameterError("T", "must be positive")
        if self.A_v is not None and not self.A_v > 0:
            raise InvalidParameterError("A_v", "must be positive")
        if not self.B_hz > 0:
            raise InvalidParameterError("B_hz", "must be positive")
        if not self.lag_tau > 0:
            raise InvalidParameterError("lag_tau", "must be positive")
        if self.detector not in ("quadrature", "product"):
            raise InvalidParameterError("detector", "must be 'quadrature' or 'product'")

    @property
    def gain(self):
        return tune_loop(self.T) if self.A_v is None else self.A_v

    @property
    def zeta(self):
        return damping(self.gain, self.T)


@dataclass
class PllState:
    theta: float = 0.0  # oscillator phase, unwrapped
    omega: float = 0.0  # oscillator frequency
    z: float = 0.0  # loop-filter output
    z_lp: float = 0.0
    omega_lp: float = 0.0
    theta_pD: float = 0.0  # compensated estimate of the harmonic phase
    locked: bool = False
    n: int = 0


class PhaseLockedLoop:
    """
    Multiplying phase detector, first-order loop filter and gain ``A_v``.

    The oscillator frequency is ``omega_ff + A_v z`` where ``omega_ff`` is the
    frequency expected from the inverter setting. In steady state the loop
    filter output equals the sine of the residual phase error, which is added
    back (``compensate``); the band-pass phase at the estimated frequency is
    removed as well.
    """

    def __init__(self, cfg: PllConfig, omega0=0.0, theta0=0.0, dt=1e-3):
        self.cfg = cfg
        self.dt = dt
        self.state = PllState(theta=theta0, omega=omega0, omega_lp=omega0, theta_pD=theta0)
        self._n_lock = max(1, int(round(cfg.lock_window / dt)))
        self._resid = deque(maxlen=self._n_lock)
        self._resid_sum = 0.0
        self._a_filt = 1.0 - math.exp(-dt / cfg.T)
        self._a_lag = 1.0 - math.exp(-dt / cfg.lag_tau)

    def detector(self, filtered, amplitude, quadrature=None):
        """
        Normalised phase detector, ``sin(theta_in - theta)`` on average.

        The product form ``-2 v sin(theta) / a`` carries a double-frequency
        term; with the quadrature signal ``a sin(theta_in)`` the
        double-frequency terms cancel.
        """
        if amplitude <= 1e-12:
            return 0.0
        sn, cs = math.sin(self.state.theta), math.cos(self.state.theta)
        if quadrature is None:
            return -2.0 * filtered * sn / amplitude
        return (quadrature * cs - filtered * sn) / amplitude

    def step(self, filtered, amplitude, omega_ff, bp_phase=None, filter_shift=0.0,
             quadrature=None):
        """
        Advance one sample.

        ``quadrature`` is the filtered signal shifted by -90 degrees; it is
        used by the detector when ``cfg.detector == "quadrature"``.
        ``bp_phase`` is the instantaneous phase of the filtered signal and
        feeds the lock indicator; ``filter_shift`` is the band-pass phase at
        the current frequency.
        """
        s, cfg = self.state, self.cfg
        if cfg.detector == "product":
            quadrature = None
        e = self.detector(filtered, amplitude, quadrature)
        s.z += self._a_filt * (e - s.z)
        s.z_lp += self._a_lag * (s.z - s.z_lp)
        lag = math.asin(max(-1.0, min(1.0, s.z_lp))) if cfg.compensate else 0.0
        shift = filter_shift if cfg.compensate else 0.0
        s.theta_pD = s.theta + lag - shift

        if bp_phase is not None:
            r = abs(_wrap2pi_scalar(bp_phase - s.theta - lag + math.pi) - math.pi)
            if len(self._resid) == self._resid.maxlen:
                self._resid_sum -= self._resid[0]
            self._resid.append(r)
            self._resid_sum += r
            full = len(self._resid) == self._resid.maxlen
            s.locked = full and self._resid_sum / len(self._resid) < cfg.lock_threshold

        s.omega = omega_ff + cfg.gain * s.z
        s.omega_lp += self._a_lag * (s.omega - s.omega_lp)
        s.theta += self.dt * s.omega
        s.n += 1
        return s


def pll_step(pll: PhaseLockedLoop, filtered, amplitude, omega_ff):
    """Functional wrapper returning ``(state, theta_pD_hat, omega_pD_hat)``."""
    s = pll.step(filtered, amplitude, omega_ff)
    return s, s.theta_pD, s.omega


def rotor_outputs(theta_pD, omega_pD, theta_off):
    """Pump angle in [0, 2 pi) and speed from the tracked harmonic."""
    theta_p = wrap_2pi(0.5 * np.asarray(theta_pD) - theta_off)
    omega_p = 0.5 * np.asarray(omega_pD)
    if np.ndim(theta_p) == 0:
        return float(theta_p), float(omega_p)
    return theta_p, omega_p


@dataclass(frozen=True)
class OffsetCalibration:
    theta_off: float
    circular_std: float
    n: int


def calibrate_offset(theta_p_true, theta_pD_hat) -> OffsetCalibration:
    """Circular mean and circular standard deviation of ``theta_pD_hat/2 - theta_p``."""
    theta_p_true = np.asarray(theta_p_true, dtype=float)
    theta_pD_hat = np.asarray(theta_pD_hat, dtype=float)
    if theta_p_true.shape != theta_pD_hat.shape:
        raise InsufficientDataError("series must be time aligned")
    if theta_p_true.size == 0:
        raise InsufficientDataError("no locked samples to calibrate from")
    d = 0.5 * theta_pD_hat - theta_p_true
    c = np.exp(1j * d).mean()
    R = min(abs(c), 1.0)
    std = math.sqrt(-2.0 * math.log(R)) if R > 0 else math.inf
    return OffsetCalibration(float(wrap_pi(np.angle(c))), std, int(d.size))


class PressureTracker:
    """
    DC removal, band-pass and PLL for one pressure stream.

    The filter centre and the oscillator feed-forward are both
    ``2 omega_s / (z_p nu)``, the frequency of the second pressure harmonic
    at zero slip. The mean pressure is removed by a first-order high-pass
    (time constant ``dc_tau``) so the quadrature state carries no offset;
    its phase is included in the compensation.
    """

    def __init__(self, cfg: PllConfig, z_p=2, nu=1.0, dt=1e-3, omega_s0=None, dc_tau=2.0):
        self.cfg = cfg
        self.z_p, self.nu, self.dt = z_p, nu, dt
        self.bandpass = Bandpass(cfg.B_hz)
        self._alpha = 1.0 - math.exp(-dt / dc_tau)
        self._dc = None
        w0 = 0.0 if omega_s0 is None else self.center(omega_s0)
        self.pll = PhaseLockedLoop(cfg, omega0=w0, dt=dt)

    def center(self, omega_s):
        return 2.0 * omega_s / (self.z_p * self.nu)

    def response(self, omega, omega_c):
        """Complex gain of DC removal plus band-pass at ``omega``."""
        zinv = np.exp(-1j * omega * self.dt)
        hp = 1.0 - self._alpha / (1.0 - (1.0 - self._alpha) * zinv)
        return hp * discrete_response(omega, omega_c, self.cfg.B_hz, self.dt)

    def _response_scalar(self, omega, omega_c):
        h, beta = _prewarp(omega_c, self.cfg.B_hz, self.dt)
        s = 1j * (2.0 / h) * math.tan(0.5 * omega * self.dt)
        zinv = cmath.exp(-1j * omega * self.dt)
        hp = 1.0 - self._alpha / (1.0 - (1.0 - self._alpha) * zinv)
        return hp * beta * s / (s * s + beta * s + omega_c * omega_c)

    def step(self, p_D, omega_s):
        """Returns ``(theta_p_hat, omega_p_hat, locked)``."""
        if self._dc is None:
            self._dc = p_D
        self._dc += self._alpha * (p_D - self._dc)
        wc = self.center(omega_s)
        v = self.bandpass.step(p_D - self._dc, wc, self.dt)
        s = self.pll.state
        w_est = s.omega_lp if s.omega_lp > 0 else wc
        amp, phase = self.bandpass.amplitude_phase(w_est)
        shift = cmath.phase(self._response_scalar(w_est, wc))
        s = self.pll.step(v, amp, wc, bp_phase=phase, filter_shift=shift,
                          quadrature=self.bandpass.quadrature(w_est))
        theta_p = _wrap2pi_scalar(0.5 * s.theta_pD - self.cfg.theta_off)
        return theta_p, 0.5 * s.omega, s.locked
