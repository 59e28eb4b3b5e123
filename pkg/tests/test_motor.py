import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcpsense.errors import InvalidParameterError
from pcpsense.motor import (
    GearboxParams, MotorParams, VfLaw, derive_coefficients, electromagnetic_torque,
    gearbox_map, gearbox_unmap, input_vector, output, pressure_center, steady_state,
    system_matrix, vf_voltage,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_coefficients_match_hand_values(motor):
    # sigma = 1 - 0.2^2 / 0.21^2, T_s = T_r = 0.21 / 1.16
    sigma = 1 - 0.04 / 0.0441
    T = 0.21 / 1.16
    g = derive_coefficients(motor)
    assert motor.sigma == pytest.approx(sigma, rel=1e-14)
    assert g.g2 == pytest.approx((1 - sigma) / (sigma * T), rel=1e-14)
    assert g.g1 == pytest.approx(1 / (sigma * T) + g.g2, rel=1e-14)
    assert g.g3 == pytest.approx((1 - sigma) / sigma, rel=1e-14)
    assert g.g4 == pytest.approx(1 / (sigma * 0.21), rel=1e-14)


def test_sigma_override():
    m = MotorParams(1.16, 1.16, 0.21, 0.21, 0.2, sigma_override=0.081)
    assert m.sigma == 0.081


@pytest.mark.parametrize("field,value", [("R_s", 0.0), ("L_m", 0.3), ("J", -1.0), ("F", -1e-3),
                                         ("R_r", float("nan")), ("z_p", 1.5)])
def test_motor_validation(field, value):
    kw = dict(R_s=1.16, R_r=1.16, L_s=0.21, L_r=0.21, L_m=0.2, z_p=2, J=0.017, F=7.69e-4)
    kw[field] = value
    with pytest.raises(InvalidParameterError):
        MotorParams(**kw)


def test_system_matrix_structure(motor):
    g = derive_coefficients(motor)
    ws, we = 200.0, 190.0
    A = system_matrix(g, motor.T_r, ws, we)
    a = 1 / motor.T_r
    expected = np.array([
        [-g.g1, ws, g.g2, g.g3 * we],
        [-ws, -g.g1, -g.g3 * we, g.g2],
        [a, 0, -a, ws - we],
        [0, a, -(ws - we), -a],
    ])
    np.testing.assert_array_equal(A, expected)
    np.testing.assert_array_equal(input_vector(g), [g.g4, 0, 0, 0])


def test_system_matrix_rejects_nonfinite(motor):
    g = derive_coefficients(motor)
    with pytest.raises(InvalidParameterError):
        system_matrix(g, motor.T_r, float("nan"), 1.0)


def test_zero_slip_equilibrium_has_no_torque(motor):
    x = steady_state(motor, 200.0, 200.0, 300.0)
    np.testing.assert_allclose(x[2:], x[:2], rtol=1e-12)
    assert abs(electromagnetic_torque(motor, x)) < 1e-10
    assert x[0] > 0 and x[1] < 0


def test_equilibrium_solves_state_equation(motor):
    g = derive_coefficients(motor)
    A = system_matrix(g, motor.T_r, 180.0, 175.0)
    x = steady_state(motor, 180.0, 175.0, 280.0)
    np.testing.assert_allclose(A @ x + input_vector(g) * 280.0, 0.0, atol=1e-10)


@pytest.mark.parametrize("slip_sign", [1, -1])
def test_torque_sign_follows_slip(motor, slip_sign):
    ws = 200.0
    x = steady_state(motor, ws, ws - slip_sign * 5.0, 300.0)
    assert np.sign(electromagnetic_torque(motor, x)) == slip_sign


def test_torque_formula_and_vectorisation(motor):
    x = np.array([[1.0, -2.0, 0.5, -1.5], [0.0, 0.0, 0.0, 0.0]])
    k = 1.5 * 2 * (1 - motor.sigma) * 0.21
    np.testing.assert_allclose(electromagnetic_torque(motor, x),
                               [k * (-2.0 * 0.5 - 1.0 * -1.5), 0.0])


@given(st.lists(finite, min_size=4, max_size=4))
def test_output_is_half_squared_current(x):
    assert output(x) == pytest.approx(0.5 * (x[0] ** 2 + x[1] ** 2))
    assert output(x) >= 0


@given(st.floats(0.1, 500), st.floats(-100, 100), st.floats(0.5, 10), st.floats(0.1, 1))
def test_gearbox_roundtrip(w, T, nu, eta):
    g = GearboxParams(nu, eta)
    wp, Tp = gearbox_map(w, T, g)
    assert Tp == pytest.approx(eta * nu * T)
    w2, T2 = gearbox_unmap(wp, Tp, g)
    assert w2 == pytest.approx(w) and T2 == pytest.approx(T)


def test_gearbox_validation():
    with pytest.raises(InvalidParameterError):
        GearboxParams(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        GearboxParams(2.0, 1.2)


def test_vf_law(vf):
    assert vf.rated_voltage == pytest.approx(230 * math.sqrt(2))
    assert vf_voltage(vf, vf.rated_omega_s) == pytest.approx(vf.rated_voltage)
    assert vf_voltage(vf, 0.5 * vf.rated_omega_s) == pytest.approx(0.5 * vf.rated_voltage)
    boosted = VfLaw(vf.rated_voltage, vf.rated_omega_s, boost_voltage=20.0)
    assert vf_voltage(boosted, 1.0) == 20.0
    with pytest.raises(InvalidParameterError):
        vf_voltage(vf, -1.0)


def test_pressure_center_equals_omega_s_for_direct_drive():
    assert pressure_center(157.0, 2, 1.0) == 157.0
    assert pressure_center(157.0, 2, 2.94) == pytest.approx(157.0 / 2.94)
