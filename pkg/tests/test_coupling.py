import numpy as np
import pytest
from scipy.optimize import brentq

from gaspower import coupling

CURVE = coupling.ConversionCurve(e_power_to_gas=43.56729,
                                 e_gas_to_power=12.56, kappa=60.0)


def hermite_oracle(curve):
    """Independent solve of the four smoothing conditions."""
    k = curve.kappa
    e1, e2 = curve.e_power_to_gas, curve.e_gas_to_power
    a = np.array([
        [1.0, -k, k**2, -k**3],
        [0.0, 1.0, -2 * k, 3 * k**2],
        [1.0, k, k**2, k**3],
        [0.0, 1.0, 2 * k, 3 * k**2],
    ])
    b = np.array([-e1 * k, e1, e2 * k, e2])
    return np.linalg.solve(a, b)


def test_linear_branches_exact():
    assert coupling.conversion_power(100.0, CURVE) == 12.56 * 100.0
    assert coupling.conversion_power(-100.0, CURVE) == 43.56729 * -100.0
    # no smoothing leakage outside the window
    for q in (60.0, 61.0, 500.0):
        assert coupling.conversion_power(q, CURVE) == 12.56 * q
    for q in (-60.0, -61.0, -500.0):
        assert coupling.conversion_power(q, CURVE) == 43.56729 * q


def test_smoothing_matches_hermite_oracle():
    coeffs = hermite_oracle(CURVE)
    for q in np.linspace(-59.9, 59.9, 41):
        expected = coeffs @ np.array([1.0, q, q * q, q**3])
        assert coupling.conversion_power(q, CURVE) == pytest.approx(
            expected, rel=1e-12)
    assert coupling.conversion_power(0.0, CURVE) == pytest.approx(
        -465.10935, rel=1e-12)


def test_derivative_branch_values_and_continuity():
    assert coupling.conversion_power_derivative(120.0, CURVE) == 12.56
    assert coupling.conversion_power_derivative(-120.0, CURVE) == 43.56729
    for k in (-CURVE.kappa, CURVE.kappa):
        inside = coupling.conversion_power_derivative(k * (1 - 1e-12), CURVE)
        outside = coupling.conversion_power_derivative(k * (1 + 1e-12), CURVE)
        assert inside == pytest.approx(outside, rel=1e-9)


def test_derivative_matches_finite_differences():
    # strictly inside the smoothing window and strictly on the linear
    # branches; a stencil straddling the curvature jump at +-kappa would
    # carry an O(h) bias that says nothing about the derivative itself
    inside = np.linspace(-59.0, 59.0, 49)
    outside = np.concatenate([np.linspace(-120, -61, 20),
                              np.linspace(61, 120, 20)])
    h = 1e-5
    for qs in (inside, outside):
        fd = (coupling.conversion_power(qs + h, CURVE)
              - coupling.conversion_power(qs - h, CURVE)) / (2 * h)
        ana = coupling.conversion_power_derivative(qs, CURVE)
        assert np.max(np.abs(ana - fd) / np.maximum(np.abs(fd), 1.0)) < 1e-8


def test_curve_monotone_for_reference_constants():
    qs = np.linspace(-CURVE.kappa, CURVE.kappa, 2001)
    assert np.all(coupling.conversion_power_derivative(qs, CURVE) > 0.0)
    values = coupling.conversion_power(np.linspace(-200, 200, 4001), CURVE)
    assert np.all(np.diff(values) > 0.0)


def test_coupling_residual_pins_flow_on_linear_branch():
    p_per_unit = 19.299999999999976
    q = p_per_unit * 100.0 / 12.56
    assert q > CURVE.kappa
    assert abs(coupling.coupling_residual(p_per_unit, q, CURVE)) < 1e-12


def test_coupling_residual_zero_power():
    root = brentq(lambda q: coupling.conversion_power(q, CURVE), -CURVE.kappa,
                  CURVE.kappa, xtol=1e-13)
    assert abs(coupling.coupling_residual(0.0, root, CURVE)) < 1e-12
    assert coupling.coupling_residual(0.0, 0.0, CURVE) != 0.0


def test_negative_demand_sits_left_of_window():
    # small negative power demand resolves to a flow inside or left of the
    # smoothing window, where the curve is still monotone and C1
    p_per_unit = -0.08926590504578025
    target = p_per_unit * 100.0
    q = brentq(lambda x: coupling.conversion_power(x, CURVE) - target,
               -2 * CURVE.kappa, 2 * CURVE.kappa, xtol=1e-13)
    assert q < CURVE.kappa
    assert abs(coupling.coupling_residual(p_per_unit, q, CURVE)) < 1e-12


def test_invalid_constants_rejected():
    with pytest.raises(ValueError):
        coupling.ConversionCurve(0.0, 1.0, 60.0)
    with pytest.raises(ValueError):
        coupling.ConversionCurve(1.0, 1.0, 0.0)
