import numpy as np
import pytest

from convfno import container
from convfno.pde.dataset import (build_dataset, default_params, generate_series, load_dataset, make_pairs,
                                 resolve_params, split_paths)

AC_FAST = {"eps": 0.05, "dt": 1e-3, "T": 2.0}
NS_FAST = {"nu": 1e-3, "dt": 1e-2, "T": 1.5}


def test_pairs_chain_within_series(tmp_path):
    build_dataset("allen-cahn", AC_FAST, 2, 7, tmp_path, resolution=16)
    d = load_dataset(tmp_path)
    assert d.inputs.shape == (8, 1, 16, 16)  # 5 snapshots -> 4 pairs per series
    for s in range(2):
        for i in range(1, 4):
            np.testing.assert_array_equal(d.inputs[4 * s + i], d.targets[4 * s + i - 1])


def test_first_pair_only_and_cap(tmp_path):
    build_dataset("navier-stokes", NS_FAST, 3, 0, tmp_path, resolution=16, first_pair_only=True)
    assert load_dataset(tmp_path).inputs.shape == (3, 1, 16, 16)
    build_dataset("navier-stokes", NS_FAST, 3, 0, tmp_path, resolution=16, max_pairs=5)
    assert len(load_dataset(tmp_path)) == 5


def test_header_contents(tmp_path):
    px, py = build_dataset("darcy", {"variant": "threshold"}, 2, 11, tmp_path, resolution=16, split="test")
    h = container.read_header(px)
    assert h["pde"] == "darcy" and h["params"]["variant"] == "threshold" and h["base_seed"] == 11
    assert h["shape"] == [2, 1, 16, 16] and h["field_names"] == ["a"] and h["split"] == "test"
    assert container.read_header(py)["field_names"] == ["u"]
    x, _ = container.read(px)
    assert set(np.unique(x)) <= {3.0, 12.0}


def test_series_seed_is_base_plus_index(tmp_path):
    params = resolve_params("allen-cahn", AC_FAST)
    build_dataset("allen-cahn", AC_FAST, 3, 100, tmp_path, resolution=16, first_pair_only=True)
    d = load_dataset(tmp_path)
    alone = generate_series("allen-cahn", params, [102], 16)
    np.testing.assert_array_equal(d.inputs[2, 0], alone[0, 0])


def test_split_offset_continues_seeds(tmp_path):
    build_dataset("allen-cahn", AC_FAST, 4, 0, tmp_path / "a", resolution=16, first_pair_only=True)
    build_dataset("allen-cahn", AC_FAST, 2, 0, tmp_path / "b", resolution=16, first_pair_only=True,
                  split="test", series_offset=2)
    np.testing.assert_array_equal(load_dataset(tmp_path / "a").inputs[2:], load_dataset(tmp_path / "b", "test").inputs)


def test_byte_identical_rebuild(tmp_path):
    for sub in ("a", "b"):
        build_dataset("navier-stokes", NS_FAST, 2, 3, tmp_path / sub, resolution=16)
    for f in ("train_input.nopd", "train_target.nopd"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_f32_storage(tmp_path):
    build_dataset("allen-cahn", AC_FAST, 1, 0, tmp_path, resolution=16, dtype="f32")
    d = load_dataset(tmp_path)
    assert d.header["dtype"] == "f32"
    assert d.inputs.dtype == np.float64


def test_make_pairs_counts():
    s = np.arange(2 * 33 * 4).reshape(2, 33, 2, 2).astype(float)
    x, y = make_pairs(s)
    assert x.shape == (64, 1, 2, 2)
    x1, y1 = make_pairs(s, first_pair_only=True)
    assert x1.shape == (2, 1, 2, 2)


def test_ac_inputs_scaled():
    params = resolve_params("allen-cahn", AC_FAST)
    s = generate_series("allen-cahn", params, [0, 1], 16)
    np.testing.assert_allclose(np.abs(s[:, 0]).max(axis=(1, 2)), 1.0)


def test_params_and_errors(tmp_path):
    assert default_params("navier-stokes", paper_faithful=True)["dt"] == 1e-4
    assert default_params("navier-stokes")["dt"] == 1e-3
    with pytest.raises(ValueError):
        resolve_params("allen-cahn", {"nu": 1.0})
    with pytest.raises(ValueError):
        default_params("heat")
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path, "valid")
    assert split_paths(tmp_path, "x")[0].name == "x_input.nopd"


def test_t_start_drops_leading_snapshots():
    full = generate_series("allen-cahn", resolve_params("allen-cahn", AC_FAST), [4], 16)
    late = generate_series("allen-cahn", resolve_params("allen-cahn", {**AC_FAST, "t_start": 1.0}), [4], 16)
    assert full.shape[1] == 5 and late.shape[1] == 3
    np.testing.assert_array_equal(late, full[:, 2:])
    for bad in (0.3, -0.5, 2.0):
        with pytest.raises(ValueError):
            generate_series("allen-cahn", resolve_params("allen-cahn", {**AC_FAST, "t_start": bad}), [4], 16)
