import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from nearcouette.airy import airy_ai, airy_log_magnitude, airy_ray_integral

ROT = cmath.exp(1j * cmath.pi / 6)


@given(st.floats(0.0, 25.0), st.floats(-np.pi, np.pi))
def test_ai_matches_scipy_across_the_plane(r, theta):
    z = r * cmath.exp(1j * theta)
    ref = special.airy(z)[0]
    assert abs(airy_ai(z) - ref) <= 1e-10 * max(abs(ref), 1e-300) + 1e-300


def test_log_scale_is_a_pure_factor():
    z = np.array([40.0 + 3j, -30.0 + 20j, 2.0 - 1j])
    shift = np.array([50.0, -10.0, 0.3])
    assert np.allclose(airy_ai(z, shift), special.airy(z)[0] * np.exp(shift), rtol=1e-10)


def test_scaled_evaluation_beyond_overflow():
    z = 300.0 * cmath.exp(1j * 0.1)
    s = -airy_log_magnitude(z)
    val = airy_ai(z, s)
    assert np.isfinite(val) and 1e-3 < abs(val) < 1.0


def _ray_reference(z):
    f = lambda s, part: getattr(special.airy(ROT * (z + s))[0], part)
    re = integrate.quad(f, 0, 60, args=("real",), limit=400, epsabs=1e-14)[0]
    im = integrate.quad(f, 0, 60, args=("imag",), limit=400, epsabs=1e-14)[0]
    return ROT * (re + 1j * im)


@pytest.mark.parametrize("z", [0.0, 1.5 - 0.5j, -3.0 + 0.2j, -6.5 + 1j, 4.0 + 2j])
def test_ray_integral_matches_scipy_quadrature(z):
    ref = _ray_reference(z)
    assert abs(airy_ray_integral(z) - ref) < 1e-9 * max(abs(ref), 1e-12)


def test_ray_integral_at_origin_is_one_third_rotated():
    # int_0^inf Ai(t) dt = 1/3 and the ray exp(i pi/6) R+ lies in the decay sector
    val = airy_ray_integral(0.0)
    ref = _ray_reference(0.0)
    assert val == pytest.approx(ref, rel=1e-9)
