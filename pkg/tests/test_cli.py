import csv
import subprocess
import sys

import pytest

from convfno.cli import main
from convfno.config import TrainConfig, dump_yaml, train_config_to_dict

SMALL = ["--resolution", "16", "--T", "1.0", "--dt", "1e-3"]


@pytest.fixture(scope="module")
def ac_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("ac")
    assert main(["gen", "allen-cahn", *SMALL, "--series", "2", "--test-series", "1", "--eps", "0.05",
                 "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def tiny_cfgs(tmp_path_factory):
    from convfno.config import desk_model_config, model_config_to_dict
    d = tmp_path_factory.mktemp("cfg")
    fno = {"n_modes_height": 4, "n_modes_width": 4, "hidden_channels": 8, "lifting_channels": 8,
           "projection_channels": 8, "n_layers": 1}
    for k in ("fno", "toy-convfno"):
        cfg = desk_model_config(k, train_res=16, fno=fno, **({"cnn": None} if k == "fno" else {}))
        dump_yaml(model_config_to_dict(cfg), d / f"{k}.yaml")
    dump_yaml(train_config_to_dict(TrainConfig(epochs=1, batch_size=2)), d / "train.yaml")
    return d


def test_gen_writes_both_splits(ac_dir):
    names = sorted(p.name for p in ac_dir.iterdir())
    assert names == ["test_input.nopd", "test_target.nopd", "train_input.nopd", "train_target.nopd"]


def test_train_eval_sweep(ac_dir, tiny_cfgs, tmp_path, capsys):
    for k in ("fno", "toy-convfno"):
        assert main(["train", "--model-config", str(tiny_cfgs / f"{k}.yaml"), "--train-config",
                     str(tiny_cfgs / "train.yaml"), "--data", str(ac_dir), "--out", str(tmp_path / k)]) == 0
    assert (tmp_path / "fno" / "history.csv").exists()
    assert main(["eval", "--ckpt", str(tmp_path / "toy-convfno"), "--data", str(ac_dir), "--scheme", "1",
                 "--out", str(tmp_path / "e.csv")]) == 0
    assert "mean relative L2 over 2 samples" in capsys.readouterr().out
    assert main(["gen", "allen-cahn", *SMALL[:1], "24", *SMALL[2:], "--series", "1", "--test-series", "1",
                 "--out", str(tmp_path / "ac_24")]) == 0
    (tmp_path / "ac_16").symlink_to(ac_dir)
    assert main(["sweep", "--ckpt", f"f={tmp_path / 'fno'}", "--ckpt", str(tmp_path / "toy-convfno"),
                 "--resolutions", "16,24", "--data-stem", str(tmp_path / "ac"), "--out", str(tmp_path / "s.csv")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert {(r["model"], r["scheme"]) for r in rows} == {("f", "native"), ("toy-convfno", "1"), ("toy-convfno", "2")}
    assert len(rows) == 6


def test_train_model_mismatch(ac_dir, tiny_cfgs, tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--model", "unet-fno", "--model-config", str(tiny_cfgs / "fno.yaml"),
              "--data", str(ac_dir), "--out", str(tmp_path / "x")])


def test_ablate_toy(ac_dir, tiny_cfgs, tmp_path):
    out = tmp_path / "ab.csv"
    assert main(["ablate-toy", "--kernel-sets", "3;3,5", "--channels", "2", "--data", str(ac_dir),
                 "--model-config", str(tiny_cfgs / "fno.yaml"),
                 "--train-config", str(tiny_cfgs / "train.yaml"), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4


def test_verify_fft_exit_zero(tmp_path, capsys):
    assert main(["verify", "fft", "--out", str(tmp_path / "v.csv")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_report_nonzero_on_failure(capsys):
    from convfno import cli, verify
    assert cli._report([verify.Check("ok", 0.0, 1.0), verify.Check("bad", 2.0, 1.0)]) == 1
    assert "FAIL  bad" in capsys.readouterr().out


def test_darcy_rejects_time_flags(tmp_path):
    with pytest.raises(SystemExit):
        main(["gen", "darcy", "--resolution", "16", "--series", "1", "--dt", "0.1", "--out", str(tmp_path)])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "convfno", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("gen", "train", "eval", "sweep", "ablate-toy", "verify"):
        assert cmd in r.stdout
