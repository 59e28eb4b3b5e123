"""Self-check suites run by ``pcpsense verify`` and the acceptance tests.

Each check returns a :class:`CheckResult` carrying the measured value and
the threshold it was held against.
"""
from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .config import RunConfig
from .ekf import convergence_term, ekf_step, initial_state, lyapunov_value, riccati_step, sign_monitor
from .io import iter_samples, scenario_samples
from .motor import derive_coefficients, input_vector, pressure_center, system_matrix, vf_voltage
from .pipeline import (
    align_truth, calibrate, estimate_stream, simulate, steady_state_errors, truth_with_output,
    write_simulation,
)
from .plant import constant_profile, run_scenario
from .pll import PhaseLockedLoop, PllConfig, discrete_response, wrap_pi

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.name}: measured {self.measured:.4g} vs limit {self.threshold:.4g}{extra}"


# --------------------------------------------------------------------------
# loop dynamics

def check_damping(cfg: PllConfig, target=math.sqrt(0.5), tol=1e-12):
    err = abs(cfg.zeta - target)
    return CheckResult("pll damping (analytic)", err <= tol, cfg.zeta, target,
                       f"|zeta - target| = {err:.2e}")


def frequency_step_response(cfg: PllConfig, omega0=2 * math.pi * 17.0, step=0.5, dt=1e-3,
                            t_step=1.0, duration=4.0):
    """Oscillator frequency after a step of the input frequency, clean quadrature input."""
    pll = PhaseLockedLoop(cfg, omega0=omega0, dt=dt)
    n = int(round(duration / dt))
    phase, out = 0.0, np.empty(n)
    for k in range(n):
        w_in = omega0 + (step if k * dt >= t_step else 0.0)
        pll.step(math.cos(phase), 1.0, omega0, quadrature=math.sin(phase))
        out[k] = pll.state.omega
        phase += w_in * dt
    return np.arange(n) * dt, out


def check_overshoot(cfg: PllConfig, dt=1e-3, target=0.04, tol=0.02):
    step = 0.5
    t, w = frequency_step_response(replace(cfg, compensate=False), step=step, dt=dt)
    w0 = w[0]
    rel = (w[t >= 1.0] - w0) / step
    overshoot = float(rel.max() - rel[-1])
    ok = abs(overshoot - target) <= tol
    return CheckResult("pll frequency-step overshoot", ok, overshoot, target,
                       f"allowed {target - tol:.2f}..{target + tol:.2f}")


def check_bandpass(B_hz=4.0, dt=1e-3, freqs_hz=(25.0, 35.0, 45.0), tol=1e-3, z_p=2, nu=1.0):
    worst = 0.0
    for f in freqs_hz:
        wc = pressure_center(2 * math.pi * f, z_p, nu)
        g = complex(discrete_response(wc, wc, B_hz, dt))
        worst = max(worst, abs(abs(g) - 1.0), abs(math.atan2(g.imag, g.real)))
    return CheckResult("band-pass unit gain and zero phase at centre", worst <= tol, worst, tol,
                       f"{len(freqs_hz)} centre frequencies")


# --------------------------------------------------------------------------
# covariance

def check_riccati_closed_form(q=0.3, delta=1.0, dt=1e-3, duration=1.0, tol=1e-9):
    P = delta * np.eye(4)
    Z, C, Q = np.zeros((4, 4)), np.zeros(4), q * np.eye(4)
    worst = 0.0
    for k in range(1, int(round(duration / dt)) + 1):
        P, _ = riccati_step(P, Z, C, Q, 1.0, dt)
        worst = max(worst, float(np.abs(P - (delta + q * k * dt) * np.eye(4)).max()))
    return CheckResult("Riccati closed form P = (delta + q t) I", worst <= tol, worst, tol)


def check_covariance_series(min_eigs, asyms, sym_tol=1e-10):
    min_eig = float(np.min(min_eigs))
    asym = float(np.max(asyms))
    return [
        CheckResult("covariance symmetric on every step", asym <= sym_tol, asym, sym_tol),
        CheckResult("covariance positive definite on every step", min_eig > 0, min_eig, 0.0,
                    f"{len(min_eigs)} steps"),
    ]


# --------------------------------------------------------------------------
# observer convergence

def lyapunov_trace(cfg: RunConfig, profile=None, x0=None):
    """
    Noise-free run with the true electrical speed in ``A``.

    ``profile`` defaults to the configured scenario. Returns a dict with
    ``t``, ``V``, ``floor`` (the value of ``V`` at which the error is at
    round-off level relative to the state), ``sign_ok`` and ``exact`` (the
    quadratic term that decides the sign of dV/dt, see
    :func:`~pcpsense.ekf.convergence_term`).
    """
    plant = cfg.plant()
    prof = cfg.scenario.profile() if profile is None else profile
    prof = replace(prof, current_noise_std=0.0)
    res = run_scenario(prof, plant, replace(cfg.scenario.pressure, noise_std=0.0), seed=0)
    m, dt = cfg.motor, prof.sample_interval
    g = derive_coefficients(m)
    B = input_vector(g)
    w_s = float(res.omega_s[0])
    s = initial_state(cfg.ekf, m, w_s, vf_voltage(cfg.vf, w_s), x0)
    n = len(res.t)
    V, floor, exact = np.empty(n), np.empty(n), np.empty(n)
    sign = np.empty(n, dtype=bool)
    y = res.y
    zn = m.z_p * cfg.gearbox.nu
    for k in range(n):
        xk = res.x[k]
        V[k] = lyapunov_value(xk - s.x, s.P, s.t)
        floor[k] = (16 * EPS * np.linalg.norm(xk)) ** 2 / s.min_eig
        sign[k] = sign_monitor(s.x, xk).ok and sign_monitor(s.x).ok
        exact[k] = convergence_term(s.x, xk)
        w_s = float(res.omega_s[k])
        A = system_matrix(g, m.T_r, w_s, zn * res.omega_p[k])
        s = ekf_step(s, vf_voltage(cfg.vf, w_s), y[k], A, B, cfg.ekf, dt)
    return {"t": res.t, "V": V, "floor": floor, "sign_ok": sign, "exact": exact}


def lyapunov_rise(trace):
    """Relative step-to-step increase of ``V`` wherever ``V`` is above round-off."""
    V, floor = trace["V"], trace["floor"]
    active = V[:-1] > floor[:-1]
    return np.where(active, (V[1:] - V[:-1]) / np.maximum(V[:-1], 1e-300), -np.inf), active


def steady_start_profile(cfg: RunConfig, duration=2.0):
    """Constant-speed run at the scenario's first operating point."""
    sc = cfg.scenario
    if sc.kind == "constant":
        f, p = sc.omega_s / (2 * math.pi), sc.p_mean
    else:
        f, p = sc.f_start_hz, sc.pressures[0]
    return constant_profile(f, p, duration, sample_interval=sc.sample_interval)


def check_lyapunov(cfg: RunConfig, duration=2.0, slack=1e-6, transient=0.1, profile=None):
    """
    Monotonicity of ``V`` on a noise-free steady run.

    The default run holds the scenario's first operating point; ``profile``
    overrides it.
    """
    prof = steady_start_profile(cfg, duration) if profile is None else profile
    tr = lyapunov_trace(cfg, prof)
    rise, active = lyapunov_rise(tr)
    worst = float(rise.max())
    n_active = int(active.sum())
    t, sign = tr["t"], tr["sign_ok"]
    post = t >= transient
    return [
        CheckResult("Lyapunov value non-increasing", worst <= slack, worst, slack,
                    f"{len(t)} steps, {n_active} above round-off"),
        CheckResult("sign condition after transient", bool(sign[post].all()),
                    float(sign[post].mean()), 1.0, f"t >= {transient} s"),
    ]


# --------------------------------------------------------------------------
# linear-measurement oracle

def kalman_bucy_reference(A, B, C, Q, R, u, ys, x0, P0, dt):
    """Textbook continuous Kalman-Bucy filter, ``y`` held over each interval."""
    n = len(x0)

    def rhs(_, z, y):
        x, P = z[:n], z[n:].reshape(n, n)
        K = P @ C / R
        dx = A @ x + B * u + K * (y - C @ x)
        dP = A @ P + P @ A.T + Q - np.outer(P @ C, C @ P) / R
        return np.concatenate([dx, dP.ravel()])

    z = np.concatenate([x0, P0.ravel()])
    xs = np.empty((len(ys), n))
    for k, y in enumerate(ys):
        z = solve_ivp(rhs, (0.0, dt), z, method="DOP853", rtol=1e-13, atol=1e-13, args=(y,)).y[:, -1]
        xs[k] = z[:n]
    return xs


def check_kalman_bucy(cfg: RunConfig, f_hz=25.0, duration=1.0, tol=1e-8, substeps=20):
    m = cfg.motor
    g = derive_coefficients(m)
    B = input_vector(g)
    dt = cfg.scenario.sample_interval
    w_s = 2 * math.pi * f_hz
    A = system_matrix(g, m.T_r, w_s, 0.97 * w_s)
    u = vf_voltage(cfg.vf, w_s)
    C = np.array([1.0, -0.5, 0.0, 0.0])
    rng = np.random.default_rng(3)
    n = int(round(duration / dt))
    ys = 2.0 + 0.1 * rng.standard_normal(n)
    ecfg = replace(cfg.ekf, substeps=substeps, max_substeps=max(substeps, cfg.ekf.max_substeps))
    s = initial_state(ecfg, m, w_s, u)
    x0, P0 = s.x.copy(), s.P.copy()
    xs = np.empty((n, 4))
    for k in range(n):
        s = ekf_step(s, u, ys[k], A, B, ecfg, dt, C_fixed=C)
        xs[k] = s.x
    ref = kalman_bucy_reference(A, B, C, ecfg.Q, ecfg.kappa, u, ys, x0, P0, dt)
    dev = float(np.abs(xs - ref).max())
    return CheckResult("linear-measurement filter vs Kalman-Bucy reference", dev <= tol, dev, tol,
                       f"{substeps} RK4 substeps per sample")


# --------------------------------------------------------------------------
# rotor angle

def offset_distance(a, b, period=math.pi):
    """Distance between two offsets that are defined modulo ``period``."""
    d = (a - b + period / 2) % period - period / 2
    return abs(d)


def check_offsets(cfg: RunConfig, offsets_deg=(-60.0, 0.0, 30.0), f_hz=35.0, duration=15.0,
                  tol_deg=0.1, angle_tol_deg=1.0):
    results = []
    sc = cfg.scenario
    for off in offsets_deg:
        pm = replace(sc.pressure, theta_off=math.radians(off), noise_std=0.0)
        prof = constant_profile(f_hz, sc.p_mean, duration, sample_interval=sc.sample_interval)
        res = run_scenario(prof, cfg.plant(), pm, seed=0)
        samples = list(_samples(res))
        truth = {"theta_p": res.theta_p}
        cal = calibrate(cfg, samples, truth)
        err = math.degrees(offset_distance(cal.theta_off, math.radians(off)))
        results.append(CheckResult(f"offset recovery at {off:+.0f} deg", err < tol_deg, err,
                                   tol_deg, f"{cal.n} locked samples"))
        run_cfg = replace(cfg, pll=replace(cfg.pll, theta_off=cal.theta_off))
        series = estimate_stream(run_cfg, samples).arrays()
        lock = series["lock"].astype(bool)
        if not lock.any():
            results.append(CheckResult(f"rotor angle after lock at {off:+.0f} deg", False,
                                       math.inf, angle_tol_deg, "never locked"))
            continue
        first = int(np.argmax(lock))
        d = wrap_pi(series["theta_p"][first:] - res.theta_p[first:])
        worst = math.degrees(float(np.abs(d).max()))
        results.append(CheckResult(f"rotor angle after lock at {off:+.0f} deg",
                                   worst < angle_tol_deg, worst, angle_tol_deg,
                                   f"lock at t={res.t[first]:.2f} s"))
    return results


def _samples(res):
    return scenario_samples(res)


# --------------------------------------------------------------------------
# end to end

@dataclass
class StaircaseOutcome:
    steps: list
    series: dict
    runtime: float


def run_staircase(cfg: RunConfig, seed=1):
    t0 = time.perf_counter()
    res = simulate(cfg, seed)
    series = estimate_stream(cfg, _samples(res)).arrays()
    runtime = time.perf_counter() - t0
    truth = truth_with_output({"t": res.t, "omega_p": res.omega_p, "T_p": res.T_p,
                               "x1": res.x[:, 0], "x2": res.x[:, 1], "x3": res.x[:, 2],
                               "x4": res.x[:, 3]})
    align_truth(series["t"], truth)
    steps = steady_state_errors(series["t"], series["omega_s"], truth, series,
                                cfg.estimator.summary_tau, cfg.estimator.settle_window)
    return StaircaseOutcome(steps, series, runtime)


def check_staircase(outcome: StaircaseOutcome, limits=None, max_runtime=60.0):
    limits = limits or {"speed": 1e-3, "torque": 0.04, "y": 1e-3}
    out = []
    for k, lim in limits.items():
        worst = max(getattr(s, k) for s in outcome.steps)
        out.append(CheckResult(f"steady-state {k} error, all steps", worst <= lim, worst, lim,
                               f"{len(outcome.steps)} steps"))
    out.append(CheckResult("runtime", outcome.runtime < max_runtime, outcome.runtime,
                           max_runtime, "simulate + estimate, seconds"))
    return out


def check_determinism(cfg: RunConfig, seed=11):
    blobs = []
    for _ in range(2):
        res = simulate(cfg, seed)
        meas, truth, est = io.StringIO(), io.StringIO(), io.StringIO()
        write_simulation(res, meas, truth)
        meas.seek(0)
        estimate_stream(cfg, iter_samples(meas), out=est, keep=False)
        blobs.append((meas.getvalue(), truth.getvalue(), est.getvalue()))
    same = blobs[0] == blobs[1]
    return CheckResult("byte-identical reruns", same, float(same), 1.0,
                       f"{len(blobs[0][0])} + {len(blobs[0][2])} bytes compared")


def run_verify(cfg: RunConfig, quick=True):
    """All suites; ``quick`` shortens the end-to-end runs."""
    short = replace(cfg, scenario=replace(cfg.scenario, kind="constant", duration=3.0))
    results = [
        check_damping(cfg.pll),
        check_overshoot(cfg.pll, cfg.scenario.sample_interval),
        check_bandpass(cfg.pll.B_hz, cfg.scenario.sample_interval, z_p=cfg.motor.z_p,
                       nu=cfg.gearbox.nu),
        check_riccati_closed_form(delta=cfg.ekf.delta, dt=cfg.scenario.sample_interval),
    ]
    series = estimate_stream(short, _samples(simulate(short, 0))).arrays()
    results += check_covariance_series(series["p_min_eig"], series["p_asym"])
    results += check_lyapunov(cfg)
    results.append(check_kalman_bucy(cfg, duration=0.2 if quick else 1.0))
    results += check_offsets(cfg, duration=8.0 if quick else 15.0)
    results.append(check_determinism(short))
    return results
