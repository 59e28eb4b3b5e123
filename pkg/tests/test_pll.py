import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcpsense.errors import InsufficientDataError, InvalidParameterError
from pcpsense.pll import (
    Bandpass, PhaseLockedLoop, PllConfig, PressureTracker, analog_response, bandpass_step,
    calibrate_offset, damping, default_bandwidth, discrete_response, filter_phase,
    rotor_outputs, tune_loop, wrap_2pi, wrap_pi,
)
from pcpsense.verify import frequency_step_response

DT = 1e-3


@given(st.floats(-1e4, 1e4))
def test_wrap_ranges(a):
    w = float(wrap_pi(a))
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert 0 <= float(wrap_2pi(a)) < 2 * math.pi


@given(st.floats(1.0, 400.0), st.floats(50.0, 300.0), st.floats(0.5, 20.0))
def test_filter_phase_is_angle_of_response(w, wc, B):
    g = complex(analog_response(w, wc, B))
    assert float(wrap_pi(filter_phase(w, wc, B) - cmath.phase(g))) == pytest.approx(0, abs=1e-9)


@pytest.mark.parametrize("f", [25.0, 35.0, 45.0])
def test_analog_centre_is_unity(f):
    wc = 2 * math.pi * f
    assert complex(analog_response(wc, wc, 4.0)) == pytest.approx(1.0, abs=1e-12)


def test_discrete_tends_to_analog():
    wc, w = 2 * math.pi * 35, 2 * math.pi * 37
    ga = complex(analog_response(w, wc, 4.0))
    errs = [abs(complex(discrete_response(w, wc, 4.0, dt)) - ga) for dt in (1e-3, 5e-4)]
    assert errs[1] < errs[0] < 1e-2
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)  # second order


@pytest.mark.parametrize("f_in", [30.0, 35.0, 38.0])
def test_bandpass_recursion_matches_response(f_in):
    wc, w = 2 * math.pi * 35, 2 * math.pi * f_in
    bp = Bandpass(4.0)
    n = 6000
    out = np.array([bp.step(math.cos(w * k * DT), wc, DT) for k in range(n)])
    k = np.arange(n - 2000, n)
    # least-squares fit of the settled output to a cos + b sin
    M = np.column_stack([np.cos(w * k * DT), np.sin(w * k * DT)])
    a, b = np.linalg.lstsq(M, out[k], rcond=None)[0]
    g = complex(discrete_response(w, wc, 4.0, DT))
    assert complex(a, -b) == pytest.approx(g, abs=1e-9)


def test_bandpass_quadrature_and_amplitude():
    wc = 2 * math.pi * 35
    bp = Bandpass(4.0)
    for k in range(6000):
        bp.step(2.0 * math.cos(wc * k * DT), wc, DT)
    amp, ph = bp.amplitude_phase(wc)
    assert amp == pytest.approx(2.0, rel=1e-6)
    assert float(wrap_pi(ph - wc * 5999 * DT)) == pytest.approx(0.0, abs=1e-6)


def test_bandpass_validation_and_wrapper():
    with pytest.raises(InvalidParameterError):
        Bandpass(0.0)
    bp = Bandpass(4.0)
    with pytest.raises(InvalidParameterError):
        bp.step(1.0, -1.0, DT)
    s, y = bandpass_step(bp, 1.0, 100.0, DT)
    assert s is bp and y == bp.v


def test_loop_tuning():
    assert tune_loop(0.1) == 5.0
    assert damping(tune_loop(0.1), 0.1) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert PllConfig(T=0.2).zeta == pytest.approx(math.sqrt(0.5))
    assert PllConfig(T=0.1, A_v=20.0).zeta == pytest.approx(1 / (2 * math.sqrt(2.0)))
    with pytest.raises(InvalidParameterError):
        tune_loop(0.0)
    assert default_bandwidth(2 * math.pi * 2.0) == pytest.approx(4.0)


@pytest.mark.parametrize("kw", [dict(T=0), dict(B_hz=-1), dict(detector="x"), dict(A_v=-1)])
def test_pll_config_validation(kw):
    with pytest.raises(InvalidParameterError):
        PllConfig(**kw)


@pytest.mark.parametrize("T", [0.05, 0.1, 0.2])
def test_frequency_step_matches_second_order_theory(T):
    cfg = PllConfig(T=T, compensate=False)
    t, w = frequency_step_response(cfg, step=0.2, duration=1.0 + 20 * T)
    rel = (w[t >= 1.0] - w[0]) / 0.2
    z = cfg.zeta
    theory = math.exp(-math.pi * z / math.sqrt(1 - z * z))
    assert rel[-1] == pytest.approx(1.0, abs=1e-3)
    assert rel.max() - 1.0 == pytest.approx(theory, abs=0.005)


def test_detectors_agree_on_average():
    cfg = PllConfig()
    pll = PhaseLockedLoop(cfg, omega0=200.0, theta0=0.3)
    phi = 0.5
    n = 2000
    # product detector over one period of a locked oscillator
    prod = np.mean([-2 * math.cos(phi + 2 * math.pi * k / n) * math.sin(0.3 + 2 * math.pi * k / n)
                    for k in range(n)])
    quad = pll.detector(math.cos(phi), 1.0, math.sin(phi))
    assert quad == pytest.approx(math.sin(phi - 0.3), abs=1e-12)
    assert prod == pytest.approx(math.sin(phi - 0.3), abs=1e-9)
    assert pll.detector(1.0, 0.0) == 0.0


def test_rotor_outputs():
    th, w = rotor_outputs(2 * (1.0 + 0.2), 60.0, 0.2)
    assert th == pytest.approx(1.0) and w == 30.0
    arr, _ = rotor_outputs(np.array([0.0, 4 * math.pi + 1.0]), np.array([1.0, 1.0]), 0.0)
    assert np.all((arr >= 0) & (arr < 2 * math.pi))


@given(st.floats(-math.pi / 2 + 0.01, math.pi / 2 - 0.01), st.integers(0, 5))
def test_calibrate_offset_exact(off, seed):
    rng = np.random.default_rng(seed)
    th = np.cumsum(rng.uniform(0.01, 0.1, 500))
    cal = calibrate_offset(th, 2 * (th + off))
    assert cal.theta_off == pytest.approx(off, abs=1e-9)
    assert cal.circular_std < 1e-6 and cal.n == 500


def test_calibrate_offset_errors():
    with pytest.raises(InsufficientDataError):
        calibrate_offset([], [])
    with pytest.raises(InsufficientDataError):
        calibrate_offset([1.0, 2.0], [1.0])


def test_tracker_locks_on_clean_harmonic():
    # direct drive, z_p nu = 2: the harmonic sits at omega_s
    ws = 2 * math.pi * 35
    wp = 0.98 * ws / 2
    tr = PressureTracker(PllConfig(), z_p=2, nu=1.0, dt=DT, omega_s0=ws)
    locked_at = None
    errs = []
    for k in range(8000):
        th = wp * k * DT
        theta_p, omega_p, locked = tr.step(3.0 + 0.3 * math.cos(2 * th), ws)
        if locked and locked_at is None:
            locked_at = k
        if locked:
            errs.append(abs(float(wrap_pi(theta_p - th))))
    assert locked_at is not None and locked_at < 5000
    assert max(errs) < math.radians(0.5)
    assert omega_p == pytest.approx(wp, rel=1e-5)
