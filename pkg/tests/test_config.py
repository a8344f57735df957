import warnings

import pytest

from convfno.config import (ConfigError, FNOConfig, ModelConfig, TrainConfig, UNetConfig, desk_model_config,
                            dump_yaml, load_model_config, load_train_config, model_config_from_dict,
                            model_config_to_dict, train_config_to_dict)


@pytest.mark.parametrize("kind", ["fno", "toy-convfno", "unet-fno"])
def test_yaml_round_trip(tmp_path, kind):
    cfg = desk_model_config(kind)
    dump_yaml(model_config_to_dict(cfg), tmp_path / "m.yaml")
    assert load_model_config(tmp_path / "m.yaml") == cfg


def test_train_yaml_round_trip(tmp_path):
    cfg = TrainConfig(epochs=7, learning_rate=3e-4, loss="mse")
    dump_yaml(train_config_to_dict(cfg), tmp_path / "t.yaml")
    assert load_train_config(tmp_path / "t.yaml") == cfg


def test_hand_written_yaml(tmp_path):
    p = tmp_path / "m.yaml"
    p.write_text("""
model: toy-convfno
train_res: 32
fno: {n_modes_height: 8, n_modes_width: 8, in_channels: 3}
cnn: {branch_kernel_sizes: [3, 9, 15], out_channels: 8}
resize: {method: fourier}
""")
    cfg = load_model_config(p)
    assert cfg.cnn.branch_kernel_sizes == (3, 9, 15) and cfg.resize_method == "fourier"


def test_desk_defaults():
    cfg = desk_model_config("unet-fno")
    assert cfg.fno.modes == (16, 16) and cfg.fno.hidden_channels == 32
    assert cfg.fno.lifting_channels == 64 and cfg.fno.n_layers == 4 and cfg.train_res == 64
    assert cfg.c0 == 3


@pytest.mark.parametrize("bad", [
    {"model": "resnet"},
    {"model": "fno", "fno": {"in_channels": 5}},
    {"model": "unet-fno", "train_res": 60},
    {"model": "fno", "fno": {"norm": "batch"}},
    {"model": "fno", "unknown_key": 1},
    {"model": "toy-convfno", "cnn": {"branch_kernel_sizes": [4]}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        model_config_from_dict(bad)


def test_tucker_rank_one_is_dense_with_warning():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        FNOConfig(factorization="tucker", rank=1.0).validate()
    assert w
    with pytest.raises(ConfigError):
        FNOConfig(factorization="tucker", rank=0.5).validate()


def test_decay_every_default():
    assert TrainConfig(epochs=100).decay_every == 25
    assert TrainConfig(epochs=2).decay_every == 1
    with pytest.raises(ConfigError):
        TrainConfig(loss="huber").validate()


def test_unet_divisor():
    assert UNetConfig(depth=3).divisor == 8
    ModelConfig(model="unet-fno", train_res=64).validate()
