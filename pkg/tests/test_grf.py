import numpy as np
import pytest
from hypothesis import given, strategies as st

from convfno.pde.grf import GRFSpec, eigenvalues, grf_batch, grf_coefficients, grf_sample, render


def test_eigenvalue_formula():
    assert eigenvalues(0, 0) == pytest.approx(7 ** 1.5 * 49 ** -2.5)
    assert eigenvalues(1, 2) == pytest.approx(7 ** 1.5 * (4 * np.pi ** 2 * 5 + 49) ** -2.5)


@given(st.integers(4, 40), st.integers(0, 2 ** 31))
def test_real_and_reproducible(m, seed):
    c = grf_coefficients(GRFSpec(resolution=m, seed=seed))
    z = np.fft.ifft2(c) * (m * m)
    assert np.abs(z.imag).max() < 1e-12
    np.testing.assert_array_equal(grf_sample(GRFSpec(resolution=m, seed=seed)), z.real)


@given(st.integers(4, 33), st.integers(0, 1000))
def test_hermitian_coefficients(m, seed):
    c = grf_coefficients(GRFSpec(resolution=m, seed=seed))
    neg = c[(-np.arange(m)) % m][:, (-np.arange(m)) % m]
    np.testing.assert_allclose(c, np.conj(neg), atol=1e-15)


def test_zero_mean_option():
    u = grf_sample(GRFSpec(resolution=32, seed=3, zero_mean=True))
    assert abs(u.mean()) < 1e-15


def test_mean_fluctuates_at_dc_scale():
    means = np.array([grf_sample(GRFSpec(resolution=16, seed=s)).mean() for s in range(400)])
    # grid mean equals the DC coefficient, whose std is sqrt(lambda_0)
    assert means.std() == pytest.approx(np.sqrt(eigenvalues(0, 0)), rel=0.15)


def test_band_limited_same_function_on_all_grids():
    c = grf_coefficients(GRFSpec(resolution=64, seed=5, kmax=6))
    u32, u64, u96 = render(c, 32), render(c, 64), render(c, 96)
    np.testing.assert_allclose(u64[::2, ::2], u32, atol=1e-13)
    np.testing.assert_allclose(u96[::3, ::3], u32, atol=1e-13)
    with pytest.raises(ValueError):
        render(c, 12)


def test_band_limit_independent_of_resolution_field():
    a = grf_coefficients(GRFSpec(resolution=32, seed=9, kmax=5))
    b = grf_coefficients(GRFSpec(resolution=128, seed=9, kmax=5))
    np.testing.assert_array_equal(a, b)


def test_batch_seeds():
    b = grf_batch(3, 16, base_seed=10)
    np.testing.assert_array_equal(b[2], grf_sample(GRFSpec(resolution=16, seed=12)))


def test_validation():
    with pytest.raises(ValueError):
        grf_sample(GRFSpec(resolution=2))
    with pytest.raises(ValueError):
        grf_sample(GRFSpec(resolution=16, alpha=1.0))


def test_monte_carlo_spectrum_small():
    # a cheaper version of the full 2000-sample acceptance check
    n, m = 600, 16
    acc = np.zeros((m, m))
    for s in range(n):
        acc += np.abs(np.fft.fft2(grf_sample(GRFSpec(resolution=m, seed=s))) / m ** 2) ** 2
    k = np.fft.fftfreq(m, 1 / m)
    lam = eigenvalues(k[:, None], k[None, :])
    for kx, ky in [(0, 0), (1, 0), (2, 1), (3, 3)]:
        assert acc[kx, ky] / n == pytest.approx(lam[kx, ky], rel=0.2)
