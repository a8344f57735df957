import numpy as np
import pytest
from hypothesis import given, strategies as st

from convfno.fft import grid, irfft2, rfft2, wavenumbers
from convfno.verify import fft_checks, naive_dft2


@pytest.mark.parametrize("shape", [(4, 4), (5, 7), (8, 6), (8, 8)])
def test_rfft2_matches_naive_dft(shape, rng):
    x = rng.standard_normal(shape)
    np.testing.assert_allclose(rfft2(x).coeffs, naive_dft2(x), atol=1e-12, rtol=0)


def test_single_mode_coefficient_is_grid_independent():
    # cos(2 pi (2x + 3y)) has coefficient 1/2 at (2, 3) on every grid that resolves it
    for m in (8, 16, 33):
        x = grid(m)
        f = np.cos(2 * np.pi * (2 * x[:, None] + 3 * x[None, :]))
        c = rfft2(f).coeffs
        assert c[2, 3] == pytest.approx(0.5, abs=1e-14)
        # the conjugate partner (-2, -3) lies outside the stored half plane
        assert np.abs(c).sum() == pytest.approx(0.5, abs=1e-12)


def test_constant_field_has_only_dc():
    c = rfft2(np.full((6, 6), 2.5)).coeffs
    assert c[0, 0] == pytest.approx(2.5)
    c[0, 0] = 0
    assert np.abs(c).max() < 1e-15


@given(st.integers(2, 9), st.integers(2, 9), st.integers(0, 2 ** 31))
def test_round_trip(h, w, seed):
    x = np.random.default_rng(seed).standard_normal((2, h, w))
    np.testing.assert_allclose(irfft2(rfft2(x), (h, w)).data, x, atol=1e-12)


def test_irfft2_shape_mismatch():
    with pytest.raises(ValueError):
        irfft2(rfft2(np.zeros((4, 4))), (4, 6))


def test_wavenumbers_fft_order():
    np.testing.assert_array_equal(wavenumbers(5), [0, 1, 2, -2, -1])


def test_suite_green():
    assert all(c.passed for c in fft_checks())
