import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levyterm import QuadratureError
from levyterm.quadrature import adaptive_gauss_kronrod, gauss_legendre_panels, time_integral


def test_time_integral_piecewise():
    def f(s):
        return np.where(s <= 1.0, np.exp(s), 2.0 * s)

    val, _ = time_integral(f, [0.0, 1.0, 3.0], abs_tol=1e-13)
    assert val == pytest.approx(math.e - 1.0 + 8.0, rel=1e-13)


def test_time_integral_batched_complex():
    z = np.array([1.0, 1j, -0.5 + 2j])

    def f(s):
        return np.exp(s[:, None] * z[None, :])

    val, _ = time_integral(f, [0.0, 2.0], abs_tol=1e-12)
    np.testing.assert_allclose(val, np.expm1(2.0 * z) / z, rtol=1e-12)


def test_time_integral_relative_tolerance_on_large_values():
    val, _ = time_integral(lambda s: 1e12 * np.cos(s), [0.0, 1.0], abs_tol=1e-11, rel_tol=1e-13)
    assert val == pytest.approx(1e12 * math.sin(1.0), rel=1e-12)


def test_time_integral_budget():
    with pytest.raises(QuadratureError):
        time_integral(lambda s: np.sqrt(np.abs(s - 0.123456789)), [0.0, 1.0], abs_tol=1e-15,
                      max_intervals=20)


def test_gauss_kronrod_oscillatory():
    res = adaptive_gauss_kronrod(lambda u: np.cos(7 * u) * np.exp(-u), 0.0, 40.0, abs_tol=1e-12)
    exact = (1.0 - math.exp(-40.0) * (math.cos(280.0) - 7 * math.sin(280.0))) / 50.0
    assert res.value == pytest.approx(exact, abs=1e-12)
    assert res.error < 1e-11


def test_gauss_kronrod_budget():
    with pytest.raises(QuadratureError):
        adaptive_gauss_kronrod(lambda u: np.sin(1.0 / (u + 1e-9)), 0.0, 1.0, abs_tol=1e-14, max_nodes=200)


@given(deg=st.integers(0, 31), panels=st.integers(1, 5))
def test_gauss_legendre_panels_exact_on_polynomials(deg, panels):
    u, w = gauss_legendre_panels(-1.0, 2.0, panels, 16)
    exact = (2.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
    assert float(w @ u ** deg) == pytest.approx(exact, rel=1e-12, abs=1e-12)
