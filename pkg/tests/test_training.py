import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from convfno.config import TrainConfig, desk_model_config
from convfno.models import ParamStore, build_model
from convfno.tensor import Tensor
from convfno.training import (AdamState, ZeroTargetWarning, absolute_l2_loss, adam_step, load_checkpoint,
                              mse_loss, read_history, relative_l2, relative_l2_loss, train)


def tiny(kind="fno"):
    return desk_model_config(kind, train_res=16, fno={"n_modes_height": 4, "n_modes_width": 4,
                                                      "hidden_channels": 8, "lifting_channels": 8,
                                                      "projection_channels": 8, "n_layers": 2},
                             **({"cnn": None} if kind == "fno" else {}))


def data(n, seed=0, m=16):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 1, m, m))
    return x, np.roll(x, 1, axis=-1) * 0.5 + 0.1


# losses -------------------------------------------------------------------------

fields = hnp.arrays(np.float64, (2, 1, 4, 4), elements=st.floats(-5, 5))


@given(fields, fields)
def test_losses_nonnegative_and_zero_iff_equal(p, t):
    t = t + 6.0  # nonzero targets
    for fn in (relative_l2_loss, absolute_l2_loss, mse_loss):
        v = float(fn(Tensor(p), t).data)
        assert v >= 0
        assert float(fn(Tensor(t), t).data) == 0.0
        if not np.array_equal(p, t):
            assert v > 0


def test_relative_l2_identities(rng):
    t = rng.standard_normal((3, 1, 4, 4))
    assert relative_l2(np.zeros_like(t), t) == pytest.approx(1.0, rel=1e-15)
    assert relative_l2(1.1 * t, t) == pytest.approx(0.1, rel=1e-12)


def test_zero_target_excluded_with_warning():
    p = np.ones((2, 1, 2, 2))
    t = np.stack([np.zeros((1, 2, 2)), np.full((1, 2, 2), 2.0)])
    with pytest.warns(ZeroTargetWarning):
        v = float(relative_l2_loss(Tensor(p), t).data)
    assert v == pytest.approx(0.5)
    with pytest.raises(ValueError), pytest.warns(ZeroTargetWarning):
        relative_l2_loss(Tensor(p), np.zeros_like(p))


def test_relative_l2_gradient_matches_fd(rng):
    from convfno.verify import fd_check
    t = rng.standard_normal((3, 1, 4, 4))
    c = fd_check("rel", lambda a: relative_l2_loss(a, t), [Tensor(rng.standard_normal(t.shape), requires_grad=True)], rng)
    assert c.passed


# Adam ----------------------------------------------------------------------------

def test_adam_single_step_oracle():
    p = ParamStore()
    p["w"] = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    g = np.array([0.3, -4.0, 1e-3])
    st_ = AdamState()
    adam_step(p, {"w": g}, st_, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)
    m = 0.1 * g / (1 - 0.9)
    v = 0.001 * g * g / (1 - 0.999)
    np.testing.assert_allclose(p["w"].data, np.array([1.0, -2.0, 0.5]) - 1e-3 * m / (np.sqrt(v) + 1e-8), rtol=1e-15)
    # magnitude of the first step is ~lr for every entry
    np.testing.assert_allclose(np.abs(p["w"].data - [1.0, -2.0, 0.5]), 1e-3, rtol=1e-4)


def test_adam_zero_gradient_is_a_no_op():
    p = ParamStore()
    p["w"] = Tensor(np.array([0.3, -1.0]), requires_grad=True)
    adam_step(p, {"w": np.zeros(2)}, AdamState(), 1e-3, 0.9, 0.999, 1e-8)
    np.testing.assert_array_equal(p["w"].data, [0.3, -1.0])


def test_adam_converges_on_quadratic():
    p = ParamStore()
    p["w"] = Tensor(np.array([0.0]), requires_grad=True)
    state = AdamState()
    for _ in range(500):
        adam_step(p, {"w": 2 * (p["w"].data - 3.0)}, state, 0.1, 0.9, 0.999, 1e-8)
    assert abs(p["w"].data[0] - 3.0) < 1e-3


def test_adam_complex_parts_independent():
    p = ParamStore()
    p["c"] = Tensor(np.array([1 + 1j]), requires_grad=True)
    adam_step(p, {"c": np.array([2.0 - 0.0j])}, AdamState(), lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    assert p["c"].data[0].real == pytest.approx(0.9) and p["c"].data[0].imag == pytest.approx(1.0)


def test_adam_rejects_nonfinite():
    p = ParamStore()
    p["w"] = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(FloatingPointError):
        adam_step(p, {"w": np.array([1.0, np.nan])}, AdamState(), 1e-3, 0.9, 0.999, 1e-8)
    np.testing.assert_array_equal(p["w"].data, 1.0)


# training loop -------------------------------------------------------------------

def test_zero_lr_keeps_initial_params():
    cfg = tiny()
    ck = train(cfg, TrainConfig(epochs=2, learning_rate=0.0, batch_size=4), data(8))
    init = build_model(cfg, seed=0).params
    for k, v in ck.params.items():
        np.testing.assert_array_equal(v.data, init[k].data)


def test_overfit_single_sample():
    g = np.arange(16) / 16
    x = (np.sin(2 * np.pi * g)[:, None] * np.cos(2 * np.pi * g)[None, :])[None, None]
    y = np.roll(x, 1, axis=-1) * 0.5 + 0.1
    ck = train(tiny(), TrainConfig(epochs=150, batch_size=1, learning_rate=3e-3, lr_decay_every=60), (x, y))
    assert relative_l2(ck.predict(x).data, y) < 1e-2


def test_determinism_and_checkpoint_round_trip(tmp_path):
    cfg, tcfg = tiny("unet-fno"), TrainConfig(epochs=2, batch_size=4)
    a = train(cfg, tcfg, data(8), data(4, seed=1), out_dir=tmp_path / "a")
    b = train(cfg, tcfg, data(8), data(4, seed=1), out_dir=tmp_path / "b")
    strip = lambda h: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in h]
    assert strip(a.history) == strip(b.history)
    for f in (tmp_path / "a" / "params").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "params" / f.name).read_bytes()
    assert (tmp_path / "a" / "manifest.yaml").read_bytes() == (tmp_path / "b" / "manifest.yaml").read_bytes()
    loaded = load_checkpoint(tmp_path / "a")
    x = data(3, seed=5)[0]
    np.testing.assert_array_equal(loaded.predict(x).data, a.predict(x).data)
    assert strip(read_history(tmp_path / "a" / "history.csv")) == strip(a.history)


def test_history_columns(tmp_path):
    train(tiny(), TrainConfig(epochs=1, batch_size=4), data(4), out_dir=tmp_path)
    assert (tmp_path / "history.csv").read_text().splitlines()[0] == "epoch,train_loss,test_rel_l2,wall_time_s"


def test_best_epoch_selected():
    ck = train(tiny(), TrainConfig(epochs=3, batch_size=2), data(6), data(3, seed=2))
    scores = [h["test_rel_l2"] for h in ck.history]
    assert ck.best_epoch == 1 + int(np.argmin(scores))


def test_standardize_round_trip(tmp_path):
    x, y = data(6)
    ck = train(tiny(), TrainConfig(epochs=1, batch_size=3, standardize=True), (x * 10 + 3, y), out_dir=tmp_path)
    assert ck.normalizer is not None
    np.testing.assert_array_equal(load_checkpoint(tmp_path).predict(x).data, ck.predict(x).data)


def test_shape_errors():
    x, y = data(4)
    with pytest.raises(ValueError):
        train(tiny(), TrainConfig(epochs=1), (np.concatenate([x, x], axis=1), y))
    with pytest.raises(ValueError):
        train(tiny("toy-convfno"), TrainConfig(epochs=1), data(4, m=24))


def test_nan_loss_aborts():
    x, y = data(4)
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        train(tiny(), TrainConfig(epochs=1, batch_size=4), (x, y))
