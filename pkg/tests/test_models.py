import numpy as np
import pytest
from hypothesis import given, strategies as st

from convfno.config import ToyCNNConfig, UNetConfig, desk_model_config
from convfno.models import build_model, coordinate_channels, embed_fno, unet_forward
from convfno.tensor import Tape
from convfno.training import relative_l2_loss


def small(kind, **kw):
    return desk_model_config(kind, train_res=32, fno={"n_modes_height": 6, "n_modes_width": 6,
                                                      "hidden_channels": 8, "lifting_channels": 16,
                                                      "projection_channels": 16, "n_layers": 2}, **kw)


def test_coordinate_channels():
    c = coordinate_channels(2, 4, 8)
    assert c.shape == (2, 2, 4, 8)
    np.testing.assert_allclose(c[0, 0, :, 0], np.arange(4) / 4)
    np.testing.assert_allclose(c[0, 1, 0, :], np.arange(8) / 8)


@pytest.mark.parametrize("kind", ["fno", "toy-convfno", "unet-fno"])
def test_output_shape_and_determinism(kind, rng):
    cfg = small(kind)
    x = rng.standard_normal((2, 1, 32, 32))
    a = build_model(cfg, seed=3)(x).data
    b = build_model(cfg, seed=3)(x).data
    assert a.shape == (2, 1, 32, 32)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, build_model(cfg, seed=4)(x).data)


def test_fno_runs_on_any_resolvable_grid(rng):
    m = build_model(small("fno"))
    for r in (12, 20, 48):
        assert m(rng.standard_normal((1, 1, r, r))).shape == (1, 1, r, r)
    with pytest.raises(ValueError):
        m(rng.standard_normal((1, 1, 8, 8)))  # 6 modes need >= 10 points


def test_lift_sees_c0_plus_features():
    cfg = small("unet-fno")
    m = build_model(cfg)
    assert m.params["fno.lift0.weight"].shape[1] == cfg.c0 + cfg.cnn.out_channels


def test_unet_level_shapes(rng):
    cfg = UNetConfig(base_channels=4, depth=3, out_channels=5)
    m = build_model(small("unet-fno", cnn=cfg))
    trace = []
    out = unet_forward(cfg, m.params, rng.standard_normal((1, 3, 32, 32)), trace=trace)
    assert [tuple(t) for t in trace] == [(32, 32), (16, 16), (8, 8), (4, 4)]
    assert out.shape == (1, 5, 32, 32)
    with pytest.raises(ValueError):
        unet_forward(cfg, m.params, rng.standard_normal((1, 3, 36, 36)))


def test_convfno_native_requires_training_grid(rng):
    m = build_model(small("toy-convfno"))
    with pytest.raises(ValueError):
        m(rng.standard_normal((1, 1, 48, 48)))


@pytest.mark.parametrize("kind", ["toy-convfno", "unet-fno"])
def test_schemes_equal_native_at_training_grid(kind, rng):
    m = build_model(small(kind))
    x = rng.standard_normal((2, 1, 32, 32))
    native = m(x).data
    for s in (1, 2):
        np.testing.assert_array_equal(m.evaluate(x, scheme=s).data, native)


def test_scheme_shapes_off_grid(rng):
    m = build_model(small("unet-fno"))
    for r in (24, 48):
        x = rng.standard_normal((1, 1, r, r))
        assert m.evaluate(x, 1).shape == (1, 1, r, r)
        assert m.evaluate(x, 2, "fourier").shape == (1, 1, r, r)
    with pytest.raises(ValueError):
        m.evaluate(rng.standard_normal((1, 1, 32, 32)), 3)


@given(st.sampled_from([24, 32, 40, 64]), st.integers(0, 100))
def test_embedding_reproduces_fno(r, seed):
    fno = build_model(small("fno"), seed=seed)
    x = np.random.default_rng(seed).standard_normal((1, 1, r, r))
    for cnn in (UNetConfig(base_channels=4), ToyCNNConfig(branch_kernel_sizes=(3, 9))):
        conv = embed_fno(fno, cnn, seed=seed + 1)
        assert np.abs(conv.eval_scheme2(x).data - fno(x).data).max() <= 1e-12


def test_embedding_bit_exact_at_training_grid(rng):
    fno = build_model(small("fno"), seed=1)
    conv = embed_fno(fno, UNetConfig(base_channels=4))
    x = rng.standard_normal((2, 1, 32, 32))
    np.testing.assert_array_equal(conv(x).data, fno(x).data)


@pytest.mark.parametrize("kind", ["toy-convfno", "unet-fno"])
def test_gradient_reaches_cnn_and_fno(kind, rng):
    m = build_model(small(kind))
    x = rng.standard_normal((2, 1, 32, 32))
    y = rng.standard_normal((2, 1, 32, 32))
    with Tape() as tape:
        loss = relative_l2_loss(m(x), y)
    g = tape.backward(loss)
    names = {id(t): n for n, t in m.params.items()}
    cnn = sum(np.linalg.norm(v) for k, v in g.items() if names[id(k)].startswith("cnn."))
    fno = sum(np.linalg.norm(v) for k, v in g.items() if names[id(k)].startswith("fno."))
    assert cnn > 0 and fno > 0


def test_param_count_positive_and_complex_spectral():
    m = build_model(desk_model_config("fno"))
    assert m.params.num_params() > 0
    w = m.params["fno.block0.spectral.weight"]
    assert w.is_complex and w.shape == (32, 32, 31, 16)


def _hand_count_unet_fno():
    conv = lambda o, i, k: o * i * k * k
    n = 0
    # UNet 16-32-64-128, two bias-free 3x3 convs per level
    widths, prev = [16, 32, 64, 128], 3
    for c in widths:
        n += conv(c, prev, 3) + conv(c, c, 3)
        prev = c
    for c, wide in ((64, 128), (32, 64), (16, 32)):
        n += wide * c * 4 + c                          # 2x2 transpose conv with bias
        n += conv(c, 2 * c, 3) + conv(c, c, 3)
    n += 32 * 16 + 32                                  # 1x1 output conv
    # FNO: in 3 + 32, lift 64, width 32, 16x16 modes, 4 blocks, projection 64
    lin = lambda o, i, bias=True: o * i + (o if bias else 0)
    n += lin(64, 35) + lin(32, 64)
    block = 2 * 32 * 32 * 31 * 16 + lin(32, 32, False) + 2 * 32   # spectral (re, im), skip, norm
    block += lin(32, 32) + lin(32, 32) + lin(32, 32, False) + 2 * 32  # mlp, mlp skip, norm
    n += 4 * block
    n += lin(64, 32) + lin(1, 64)
    return n


def test_param_count_matches_hand_count():
    assert build_model(desk_model_config("unet-fno")).params.num_params() == _hand_count_unet_fno()


def test_init_is_seed_deterministic_and_norms_start_at_identity():
    a, b = build_model(desk_model_config("unet-fno"), seed=5), build_model(desk_model_config("unet-fno"), seed=5)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k].data, b.params[k].data)
        if k.endswith(".gamma"):
            np.testing.assert_array_equal(a.params[k].data, 1.0)
        if k.endswith(".beta"):
            np.testing.assert_array_equal(a.params[k].data, 0.0)


@pytest.mark.parametrize("kind", ["fno", "unet-fno"])
def test_shift_equivariance_without_coordinates(kind, rng):
    m = build_model(small(kind, use_coords=False))
    x = rng.standard_normal((1, 1, 32, 32))
    shift = 8  # a multiple of the UNet pooling period
    a = np.roll(m(x).data, (shift, -shift), axis=(-2, -1))
    b = m(np.roll(x, (shift, -shift), axis=(-2, -1))).data
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_zero_spectral_and_skip_weights_give_pointwise_map(rng):
    m = build_model(small("fno"))
    for k, t in m.params.items():
        if k.endswith(("spectral.weight", "skip.weight")):
            t.data = np.zeros_like(t.data)
    y = m(np.full((1, 1, 32, 32), 0.7)).data
    np.testing.assert_allclose(y, y[0, 0, 0, 0], atol=1e-14)


def test_toy_cnn_degenerate_weights(rng):
    cfg = small("toy-convfno", cnn=ToyCNNConfig(branch_kernel_sizes=(3,), branch_channels=8, out_channels=16))
    m = build_model(cfg)
    x = np.abs(rng.standard_normal((2, 1, 32, 32)))
    assert m.cnn(x).shape == (2, 16, 32, 32)
    for k, t in m.params.items():
        if k.startswith("cnn."):
            t.data = np.zeros_like(t.data)
    np.testing.assert_array_equal(m.cnn(x).data, 0.0)
    # centre taps route the (non-negative) field channel through every ReLU and into output channel 0
    for k, t in m.params.items():
        if k.startswith("cnn.branch0.conv"):
            kk = t.shape[-1]
            t.data[0, 0, kk // 2, kk // 2] = 1.0
    m.params["cnn.fuse.weight"].data[0, 0, 0, 0] = 1.0
    np.testing.assert_allclose(m.cnn(x).data[:, 0], x[:, 0], rtol=1e-15)


def test_toy_shape_with_two_branches(rng):
    m = build_model(small("toy-convfno", cnn=ToyCNNConfig(branch_kernel_sizes=(3, 9))))
    assert m.cnn(rng.standard_normal((3, 1, 32, 32))).shape == (3, 16, 32, 32)


def test_scheme1_on_constant_field():
    from convfno.resize import resize
    m = build_model(small("unet-fno"))
    c = 0.3
    got = m.evaluate(np.full((1, 1, 48, 48), c), scheme=1).data
    ref = resize(m(np.full((1, 1, 32, 32), c)), 48, "bilinear").data
    np.testing.assert_array_equal(got, ref)


def test_scheme2_agrees_across_grids_on_band_limited_input():
    from convfno.pde.grf import GRFSpec, grf_coefficients, render
    m = build_model(small("unet-fno"), seed=2)
    coeffs = grf_coefficients(GRFSpec(resolution=32, seed=9, kmax=4))
    lo = m.evaluate(render(coeffs, 32)[None, None], scheme=2).data
    hi = m.evaluate(render(coeffs, 64)[None, None], scheme=2, method="fourier").data
    rel = np.linalg.norm(hi[..., ::2, ::2] - lo) / np.linalg.norm(lo)
    assert rel < 0.05, rel
