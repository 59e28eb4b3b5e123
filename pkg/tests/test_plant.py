import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pcpsense.errors import InvalidParameterError
from pcpsense.motor import derive_coefficients, electromagnetic_torque, vf_voltage
from pcpsense.plant import (
    LoadModel, PlantState, PressureModel, ScenarioProfile, constant_profile, plant_step,
    pressure_sample, run_scenario, staircase_profile,
)


def _rhs(plant, omega_s, p_mean):
    m, gb = plant.motor, plant.gearbox
    g = derive_coefficients(m)
    u = vf_voltage(plant.vf, omega_s)
    a = 1 / m.T_r

    def f(_, z):
        x1, x2, x3, x4, wm, th = z
        we = m.z_p * wm
        s = omega_s - we
        Te = electromagnetic_torque(m, z[:4])
        TL = plant.load.pump_torque(p_mean, wm / gb.nu) / (gb.eta * gb.nu)
        return [
            -g.g1 * x1 + omega_s * x2 + g.g2 * x3 + g.g3 * we * x4 + g.g4 * u,
            -omega_s * x1 - g.g1 * x2 - g.g3 * we * x3 + g.g2 * x4,
            a * (x1 - x3) + s * x4,
            a * (x2 - x4) - s * x3,
            (Te - m.F * wm - TL) / m.J,
            wm,
        ]
    return f


def test_equilibrium_balances_torque(plant):
    s = plant.equilibrium(2 * math.pi * 35, 3.45)
    Te = electromagnetic_torque(plant.motor, s.x)
    assert Te == pytest.approx(plant.motor.F * s.omega_m + plant.load_torque(s.omega_m, 3.45),
                               rel=1e-10)
    assert 0 < 2 * math.pi * 35 - 2 * s.omega_m < 0.05 * 2 * math.pi * 35


def test_equilibrium_is_stationary(plant):
    ws = 2 * math.pi * 30
    s0 = plant.equilibrium(ws, 2.7)
    s1 = plant.advance(s0, ws, 2.7, 2.5e-4, 400)
    np.testing.assert_allclose(s1.x, s0.x, rtol=1e-9, atol=1e-9)
    assert s1.omega_m == pytest.approx(s0.omega_m, rel=1e-10)
    assert s1.theta_m == pytest.approx(0.1 * s0.omega_m, rel=1e-9)


def test_rk4_against_adaptive_reference(plant):
    ws, pm = 2 * math.pi * 40, 4.2
    s0 = plant.equilibrium(2 * math.pi * 35, 3.45)  # then step the inverter frequency
    z0 = [*s0.x, s0.omega_m, 0.0]
    ref = solve_ivp(_rhs(plant, ws, pm), (0, 0.2), z0, method="DOP853", rtol=1e-12, atol=1e-12)
    errs = []
    for n in (400, 800):
        s = plant.advance(PlantState(s0.x.copy(), s0.omega_m, 0.0, s0.nu), ws, pm, 0.2 / n, n)
        errs.append(np.abs(np.r_[s.x, s.omega_m] - ref.y[:5, -1]).max())
    assert errs[1] < 1e-6
    # fourth order: halving the step cuts the error by about 16
    assert errs[0] / errs[1] > 10


def test_plant_step_rejects_large_dt(plant):
    s = plant.equilibrium(150.0, 2.0)
    with pytest.raises(InvalidParameterError):
        plant_step(s, 150.0, plant.load, plant.motor, plant.gearbox, plant.vf, 5e-3)


def test_pressure_second_harmonic_phase():
    pm = PressureModel(theta_off=math.radians(25.0))
    th = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
    p = pressure_sample(th, pm, p_mean=3.0)
    c2 = 2 * np.mean(p * np.exp(-2j * th))
    assert abs(c2) == pytest.approx(pm.amplitudes[1], rel=1e-10)
    # a cos(2(theta + off)) -> angle of the k=2 Fourier coefficient is 2 off
    assert np.angle(c2) == pytest.approx(2 * math.radians(25.0), abs=1e-10)
    assert p.mean() == pytest.approx(3.0)


def test_pressure_model_validation():
    with pytest.raises(InvalidParameterError):
        PressureModel(amplitudes=(0.5, 0.3), phases=(0, 0))
    with pytest.raises(InvalidParameterError):
        PressureModel(noise_std=-1)


def test_staircase_profile_shape():
    p = staircase_profile()
    assert p.duration == pytest.approx(150.0)
    assert [w / (2 * math.pi) for _, w in p.omega_s_schedule] == pytest.approx([25, 30, 35, 40, 45])
    assert p.pressure_at(0.0) == 2.0 and p.pressure_at(149.0) == 4.9
    assert p.omega_s_at(30.0) == pytest.approx(2 * math.pi * 30)
    assert p.step_windows()[1] == (30.0, 60.0)
    with pytest.raises(InvalidParameterError):
        staircase_profile(pressures=(2.0,))


def test_profile_validation():
    with pytest.raises(InvalidParameterError):
        ScenarioProfile(((0.0, 100.0),), ((1.0, 2.0),))


def test_load_model():
    assert LoadModel().pump_torque(2.0, 10.0) == pytest.approx(5 + 16 + 0.5)
    with pytest.raises(InvalidParameterError):
        LoadModel(c1=-1)


def test_run_scenario_seeded(plant):
    prof = constant_profile(30.0, 2.5, 0.2, current_noise_std=0.01)
    pm = PressureModel(noise_std=0.01)
    a = run_scenario(prof, plant, pm, seed=4)
    b = run_scenario(prof, plant, pm, seed=4)
    c = run_scenario(prof, plant, pm, seed=5)
    np.testing.assert_array_equal(a.p_D, b.p_D)
    np.testing.assert_array_equal(a.i_eff, b.i_eff)
    assert not np.array_equal(a.p_D, c.p_D)
    np.testing.assert_array_equal(a.x, c.x)  # noise never touches the truth
    assert len(a) == 200 and a.t[1] == pytest.approx(1e-3)


def test_noise_free_current_is_rms_of_state(plant):
    res = run_scenario(constant_profile(30.0, 2.5, 0.05), plant, PressureModel(), seed=0)
    np.testing.assert_allclose(res.i_eff ** 2, res.y, rtol=1e-12)
