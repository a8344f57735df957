"""numba and numpy kernels must agree; the switch must take effect."""
import os
import subprocess
import sys

import numpy as np
import pytest

from convfno import _accel, kernels

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")


def both(fn, *args):
    with _accel.use_numba(True):
        a = fn(*args)
    with _accel.use_numba(False):
        b = fn(*args)
    return a, b


def test_gelu_parity(rng):
    x = rng.standard_normal((3, 4, 5, 6)) * 3
    a, b = both(kernels.gelu, x)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)
    (ya, sa), (yb, sb) = both(kernels.gelu_with_slope, x[:, :, ::2])  # non-contiguous input
    np.testing.assert_allclose(ya, yb, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(sa, sb, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("nsteps", [1, 2, 3, 4])
@pytest.mark.parametrize("track", [True, False])
def test_allen_cahn_parity(rng, nsteps, track):
    u = np.clip(rng.standard_normal((2, 12, 12)), -1, 1)
    ua, ub = u.copy(), u.copy()
    with _accel.use_numba(True):
        oa = kernels.allen_cahn_steps(ua, nsteps, 1e-3, 0.01, 1 / 12, 0.0 if track else -1.0)
    with _accel.use_numba(False):
        ob = kernels.allen_cahn_steps(ub, nsteps, 1e-3, 0.01, 1 / 12, 0.0 if track else -1.0)
    np.testing.assert_allclose(ua, ub, rtol=0, atol=1e-13)
    if track:
        np.testing.assert_allclose(oa, ob, rtol=1e-12)


def test_darcy_apply_parity(rng):
    u = rng.standard_normal((9, 9))
    a = np.exp(rng.standard_normal((9, 9)))
    a_out, b_out = np.empty_like(u), np.empty_like(u)
    with _accel.use_numba(True):
        kernels.darcy_apply(u, a, a.T.copy(), 64.0, a_out)
    with _accel.use_numba(False):
        kernels.darcy_apply(u, a, a.T.copy(), 64.0, b_out)
    np.testing.assert_allclose(a_out, b_out, rtol=1e-14, atol=1e-12)


def test_group_norm_parity(rng):
    x = rng.standard_normal((2, 6, 5, 4))
    gamma, beta = rng.standard_normal(6), rng.standard_normal(6)
    fa, fb = both(kernels.group_norm_forward, x, gamma, beta, 3, 1e-5)
    for p, q in zip(fa, fb):
        np.testing.assert_allclose(p, q, rtol=1e-12, atol=1e-13)
    g = rng.standard_normal(x.shape)
    ba, bb = both(kernels.group_norm_backward, x, g, gamma, fa[1], fa[2], 3)
    for p, q in zip(ba, bb):
        np.testing.assert_allclose(p, q, rtol=1e-11, atol=1e-12)


def test_env_flag_disables_numba():
    code = "from convfno import _accel; print(_accel.numba_enabled())"
    env = {**os.environ, _accel.ENV_FLAG: "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
    env.pop(_accel.ENV_FLAG)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "True"


def test_dispatch_exposes_both_paths():
    assert kernels.gelu.fast is not kernels.gelu.slow
