"""Simulate / estimate / calibrate runs wired from a :class:`RunConfig`."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .config import RunConfig
from .ekf import lyapunov_value
from .errors import InsufficientDataError, InvalidParameterError, PcpSenseError
from .estimator import SoftSensor
from .io import (
    EKF_COLUMNS, ESTIMATE_COLUMNS, PLL_COLUMNS, CsvWriter, SampleRecord, scenario_samples,
    write_samples, write_truth,
)
from .motor import output
from .plant import ScenarioResult, run_scenario
from .pll import PressureTracker, calibrate_offset


# --------------------------------------------------------------------------
# simulate

def simulate(cfg: RunConfig, seed=None) -> ScenarioResult:
    """Run the configured scenario. A seed is required (argument or config)."""
    seed = cfg.scenario.seed if seed is None else seed
    if seed is None:
        raise InvalidParameterError("scenario.seed", "an RNG seed is required in simulate mode")
    sc = cfg.scenario
    return run_scenario(sc.profile(), cfg.plant(), sc.pressure_model(), seed=int(seed))


def write_simulation(result: ScenarioResult, meas_stream, truth_stream=None):
    write_samples(meas_stream, scenario_samples(result))
    if truth_stream is not None:
        write_truth(truth_stream, result)


# --------------------------------------------------------------------------
# estimate

@dataclass
class EstimateSeries:
    """Per-sample estimates kept in memory for summaries and tests."""

    t: list = field(default_factory=list)
    omega_s: list = field(default_factory=list)
    theta_p: list = field(default_factory=list)
    omega_p: list = field(default_factory=list)
    T_p: list = field(default_factory=list)
    y_hat: list = field(default_factory=list)
    lock: list = field(default_factory=list)
    sign_ok: list = field(default_factory=list)
    theta_pD: list = field(default_factory=list)
    p_min_eig: list = field(default_factory=list)
    p_asym: list = field(default_factory=list)

    def arrays(self):
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


def estimate_stream(cfg: RunConfig, samples, out=None, truth=None, pll_out=None,
                    ekf_out=None, keep=True, stats=None) -> EstimateSeries | None:
    """
    Push samples through the soft sensor.

    ``out``/``pll_out``/``ekf_out`` are optional text streams. ``truth`` is a
    column dict aligned with the samples; it only feeds the ``V`` column of
    the observer diagnostics. With ``keep=False`` nothing is accumulated
    except the running counters written into ``stats`` (a dict) if given.
    """
    if stats is not None:
        stats.update(samples=0, locked=0, sign_ok=0, min_p_eig=math.inf)
    sensor = None
    w_est = CsvWriter(out, ESTIMATE_COLUMNS) if out is not None else None
    w_pll = CsvWriter(pll_out, PLL_COLUMNS) if pll_out is not None else None
    w_ekf = CsvWriter(ekf_out, EKF_COLUMNS) if ekf_out is not None else None
    series = EstimateSeries() if keep else None
    dt = cfg.scenario.sample_interval
    t_prev = None
    for k, s in enumerate(samples):
        if t_prev is not None and not math.isclose(s.t - t_prev, dt, rel_tol=1e-6, abs_tol=1e-9):
            raise InvalidParameterError("t", f"sample spacing {s.t - t_prev!r} at t={s.t!r} "
                                             f"differs from sample_interval {dt!r}")
        t_prev = s.t
        if sensor is None:
            sensor = SoftSensor.from_config(cfg)
        P_before = sensor.ekf.P if sensor.ekf is not None else None
        try:
            rec, diag = sensor.step(s.t, s.p_D, s.i_eff, s.omega_s)
        except PcpSenseError as exc:
            exc.sample_t = s.t
            raise
        if w_est:
            w_est.write(rec.t, rec.theta_p, rec.omega_p, rec.T_p, rec.y_hat, rec.lock, rec.sign_ok)
        if w_pll:
            w_pll.write(rec.t, diag.theta_pD, rec.omega_p, rec.lock)
        if w_ekf:
            V = None
            if truth is not None:
                if k >= len(truth["t"]) or abs(truth["t"][k] - s.t) > 1e-9:
                    raise InvalidParameterError("truth", f"no truth row for t={s.t!r}")
                x_true = np.array([truth[c][k] for c in ("x1", "x2", "x3", "x4")])
                P0 = P_before if P_before is not None else sensor.ekf_cfg.delta * np.eye(4)
                V = lyapunov_value(x_true - diag.x_hat, P0, s.t)
            x = diag.x_hat
            w_ekf.write(rec.t, x[0], x[1], x[2], x[3], rec.y_hat, diag.T_e, rec.T_p, V,
                        rec.sign_ok, diag.p_min_eig)
        if stats is not None:
            stats["samples"] += 1
            stats["locked"] += bool(rec.lock)
            stats["sign_ok"] += bool(rec.sign_ok)
            stats["min_p_eig"] = min(stats["min_p_eig"], diag.p_min_eig)
        if series is not None:
            P = diag.P
            series.t.append(rec.t)
            series.omega_s.append(s.omega_s)
            series.theta_p.append(rec.theta_p)
            series.omega_p.append(rec.omega_p)
            series.T_p.append(rec.T_p)
            series.y_hat.append(rec.y_hat)
            series.lock.append(rec.lock)
            series.sign_ok.append(rec.sign_ok)
            series.theta_pD.append(diag.theta_pD)
            series.p_min_eig.append(diag.p_min_eig)
            series.p_asym.append(float(np.abs(P - P.T).max()))
    return series


# --------------------------------------------------------------------------
# summary

def lowpass(x, tau, dt):
    """First-order low-pass started at ``x[0]`` (zero-order-hold discretisation)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x
    a = 1.0 - math.exp(-dt / tau)
    y, _ = lfilter([a], [1.0, a - 1.0], x, zi=[(1.0 - a) * x[0]])
    return y


def constant_segments(omega_s, min_len=1):
    """``(start, stop)`` index ranges over which ``omega_s`` is constant."""
    omega_s = np.asarray(omega_s)
    if omega_s.size == 0:
        return []
    edges = np.flatnonzero(np.diff(omega_s) != 0) + 1
    bounds = np.concatenate(([0], edges, [omega_s.size]))
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b - a >= min_len]


@dataclass(frozen=True)
class StepError:
    f_hz: float
    t_start: float
    t_end: float
    speed: float
    torque: float
    y: float


def steady_state_errors(t, omega_s, truth: dict, est: dict, tau=0.5, window=10.0):
    """
    Relative errors in the settled part of every constant-speed step.

    Both truth and estimate pass a first-order low-pass of time constant
    ``tau``. The error of a step is the largest absolute deviation over the
    last ``window`` seconds (or the second half of a shorter step), divided
    by the mean magnitude of the filtered truth.
    """
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise InsufficientDataError("need at least two samples")
    dt = float(t[1] - t[0])
    pairs = {
        "speed": (truth["omega_p"], est["omega_p"]),
        "torque": (truth["T_p"], est["T_p"]),
        "y": (truth["y"], est["y_hat"]),
    }
    filt = {k: (lowpass(a, tau, dt), lowpass(b, tau, dt)) for k, (a, b) in pairs.items()}
    out = []
    for a, b in constant_segments(omega_s, min_len=2):
        n_win = min(int(round(window / dt)), (b - a) // 2)
        sl = slice(b - n_win, b)
        errs = {}
        for k, (tr, es) in filt.items():
            ref = np.abs(tr[sl]).mean()
            errs[k] = float(np.abs(es[sl] - tr[sl]).max() / ref) if ref > 0 else math.inf
        out.append(StepError(float(omega_s[a]) / (2 * math.pi), float(t[a]), float(t[b - 1]),
                             **errs))
    return out


def truth_with_output(truth: dict) -> dict:
    x = np.column_stack([truth[c] for c in ("x1", "x2", "x3", "x4")])
    return dict(truth, y=output(x))


def align_truth(samples_t, truth: dict):
    tt = truth["t"]
    if len(tt) != len(samples_t) or not np.allclose(tt, samples_t, rtol=0, atol=1e-9):
        raise InvalidParameterError("truth", "timestamps do not match the measurement file")


def summarize(stats: dict, cfg: RunConfig, series: EstimateSeries | None = None,
              truth: dict | None = None) -> dict:
    """Run summary; the error section needs both ``series`` and ``truth``."""
    n = stats["samples"]
    summary = {
        "samples": n,
        "locked_fraction": stats["locked"] / n if n else 0.0,
        "sign_ok_fraction": stats["sign_ok"] / n if n else 0.0,
        "min_p_eig": stats["min_p_eig"] if n else None,
    }
    if truth is not None and series is not None:
        a = series.arrays()
        align_truth(a["t"], truth)
        steps = steady_state_errors(a["t"], a["omega_s"], truth_with_output(truth), a,
                                    cfg.estimator.summary_tau, cfg.estimator.settle_window)
        summary["steps"] = [s.__dict__ for s in steps]
        summary["max_rel_error"] = {
            k: max(getattr(s, k) for s in steps) for k in ("speed", "torque", "y")
        }
    return summary


# --------------------------------------------------------------------------
# calibrate

def calibrate(cfg: RunConfig, samples, truth: dict):
    """
    Estimate the pressure-to-rotor offset from locked samples.

    The result is expressed in the branch of this run's tracked phase; the
    second harmonic alone defines it only modulo pi.
    """
    dt = cfg.scenario.sample_interval
    tracker = None
    theta_pD, idx = [], []
    for k, s in enumerate(samples):
        if tracker is None:
            tracker = PressureTracker(cfg.pll, cfg.motor.z_p, cfg.gearbox.nu, dt,
                                      omega_s0=s.omega_s, dc_tau=cfg.estimator.dc_tau)
        _, _, locked = tracker.step(s.p_D, s.omega_s)
        if locked:
            theta_pD.append(tracker.pll.state.theta_pD)
            idx.append(k)
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        raise InsufficientDataError("the loop never locked; nothing to calibrate from")
    return calibrate_offset(np.asarray(truth["theta_p"])[idx], np.asarray(theta_pD))


def samples_from_arrays(t, p_D, i_eff, omega_s):
    for row in zip(t, p_D, i_eff, omega_s):
        yield SampleRecord(*map(float, row))
