"""Losses, Adam, the training loop and on-disk checkpoints."""
from __future__ import annotations

import copy
import csv
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import container, ops
from .config import (ModelConfig, TrainConfig, dump_yaml, load_yaml, model_config_from_dict,
                     model_config_to_dict, train_config_from_dict, train_config_to_dict)
from .models import ConvFNO, ParamStore, build_model
from .tensor import Tape, Tensor, as_tensor, record

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "test_rel_l2", "wall_time_s")
CHECKPOINT_FORMAT = "convfno-checkpoint"


class ZeroTargetWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# losses

def _per_sample(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))


def _valid_targets(tnorm: np.ndarray) -> np.ndarray:
    valid = tnorm > 0
    if not valid.all():
        bad = np.flatnonzero(~valid).tolist()
        warnings.warn(f"samples {bad} have zero-norm targets and are excluded", ZeroTargetWarning, stacklevel=3)
    return valid


def relative_l2_per_sample(pred, target) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ||pred - target|| / ||target|| and a validity mask (False for zero targets)."""
    p = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=float)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"prediction {p.shape} and target {t.shape} differ")
    tn = _per_sample(t)
    valid = _valid_targets(tn)
    err = np.full(p.shape[0], np.nan)
    err[valid] = _per_sample(p - t)[valid] / tn[valid]
    return err, valid


def relative_l2(pred, target) -> float:
    err, valid = relative_l2_per_sample(pred, target)
    if not valid.any():
        raise ValueError("every target in the batch has zero norm")
    return float(err[valid].mean())


def relative_l2_loss(pred: Tensor, target) -> Tensor:
    """Differentiable batch mean of per-sample relative L2 errors."""
    pred = as_tensor(pred)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=float)
    if pred.shape != t.shape:
        raise ValueError(f"prediction {pred.shape} and target {t.shape} differ")
    d = pred.data - t
    dn = _per_sample(d)
    tn = _per_sample(t)
    valid = _valid_targets(tn)
    if not valid.any():
        raise ValueError("every target in the batch has zero norm")
    n = valid.sum()
    value = np.sum(dn[valid] / tn[valid]) / n

    def back(g):
        scale = np.zeros_like(dn)
        ok = valid & (dn > 0)
        scale[ok] = 1.0 / (dn[ok] * tn[ok] * n)
        return (g * scale.reshape(-1, *([1] * (d.ndim - 1))) * d,)

    return record(np.asarray(value), (pred,), back)


def absolute_l2_loss(pred: Tensor, target) -> Tensor:
    pred = as_tensor(pred)
    d = pred.data - np.asarray(target, dtype=float)
    dn = _per_sample(d)
    B = d.shape[0]

    def back(g):
        scale = np.where(dn > 0, 1.0 / np.where(dn > 0, dn, 1.0) / B, 0.0)
        return (g * scale.reshape(-1, *([1] * (d.ndim - 1))) * d,)

    return record(np.asarray(dn.mean()), (pred,), back)


def mse_loss(pred: Tensor, target) -> Tensor:
    d = ops.sub(pred, np.asarray(target, dtype=float))
    return ops.mean(ops.mul(d, d))


LOSSES = {"relative_l2": relative_l2_loss, "absolute_l2": absolute_l2_loss, "mse": mse_loss}


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def _real_view(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    return a.view(np.float64) if np.iscomplexobj(a) else a


def adam_step(params: ParamStore, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Bias-corrected Adam; complex parameters are updated as (re, im) pairs.

    ``grads`` maps parameter names to arrays.  Nothing is modified if any
    gradient is non-finite.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise KeyError(f"no gradient for parameter {name}")
        if np.shape(g) != p.shape:
            raise ValueError(f"{name}: gradient shape {np.shape(g)} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            nbad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise FloatingPointError(f"non-finite gradient in {name} ({nbad} entries) at Adam step {state.step + 1}")
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for name, p in params.items():
        g = _real_view(np.asarray(grads[name], dtype=p.dtype))
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        upd = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new = _real_view(p.data) - upd
        p.data = new.view(np.complex128).reshape(p.shape) if p.is_complex else new
    return state


# ---------------------------------------------------------------------------
# normalization and prediction

@dataclass
class Normalizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "Normalizer":
        def stats(a):
            mu = a.mean(axis=(0, 2, 3))
            sd = a.std(axis=(0, 2, 3))
            return mu, np.where(sd > 0, sd, 1.0)
        return cls(*stats(x), *stats(y))

    def to_dict(self) -> dict:
        return {k: [float(v) for v in getattr(self, k)] for k in ("x_mean", "x_std", "y_mean", "y_std")}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("x_mean", "x_std", "y_mean", "y_std")))


def predict(model, x, normalizer: Normalizer | None = None, scheme: int | None = None,
            method: str | None = None) -> Tensor:
    """Model output in physical units; ``scheme=None`` means the native forward."""
    if normalizer is not None:
        x = (np.asarray(x) - normalizer.x_mean[None, :, None, None]) / normalizer.x_std[None, :, None, None]
    out = model(x) if scheme is None else model.evaluate(x, scheme=scheme, method=method)
    if normalizer is not None:
        out = ops.add(ops.mul(out, normalizer.y_std[None, :, None, None]), normalizer.y_mean[None, :, None, None])
    return out


def evaluate_model(model, x: np.ndarray, y: np.ndarray, normalizer: Normalizer | None = None,
                   scheme: int | None = None, method: str | None = None, batch_size: int = 16) -> np.ndarray:
    """Per-sample relative L2 errors (NaN for zero-norm targets)."""
    errs = []
    for i in range(0, x.shape[0], batch_size):
        pred = predict(model, x[i:i + batch_size], normalizer, scheme, method)
        errs.append(relative_l2_per_sample(pred, y[i:i + batch_size])[0])
    return np.concatenate(errs) if errs else np.zeros(0)


# ---------------------------------------------------------------------------
# checkpoints

@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    params: ParamStore
    dataset_fingerprint: str | None = None
    history: list = field(default_factory=list)
    best_epoch: int = 0
    normalizer: Normalizer | None = None

    def model(self):
        return build_model(self.model_config, seed=self.train_config.seed, params=copy.deepcopy(self.params))

    def predict(self, x, scheme: int | None = None, method: str | None = None) -> Tensor:
        return predict(self.model(), x, self.normalizer, scheme, method)

    def save(self, directory) -> Path:
        return save_checkpoint(self, directory)


def _param_file(name: str) -> str:
    return name.replace("/", "_") + ".nopd"


def save_checkpoint(ckpt: Checkpoint, directory) -> Path:
    d = Path(directory)
    (d / "params").mkdir(parents=True, exist_ok=True)
    entries = []
    for name, t in ckpt.params.items():
        arr = t.data
        is_c = bool(np.iscomplexobj(arr))
        stored = np.stack([arr.real, arr.imag], axis=-1) if is_c else arr
        fname = _param_file(name)
        container.write(d / "params" / fname, stored,
                        {"name": name, "complex": is_c, "param_shape": list(arr.shape)})
        entries.append({"name": name, "file": f"params/{fname}", "complex": is_c})
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "model_config": model_config_to_dict(ckpt.model_config),
        "train_config": train_config_to_dict(ckpt.train_config),
        "dataset_fingerprint": ckpt.dataset_fingerprint,
        "best_epoch": int(ckpt.best_epoch),
        "init_seed": ckpt.params.seed,
        "normalizer": ckpt.normalizer.to_dict() if ckpt.normalizer else None,
        "params": entries,
    }
    dump_yaml(manifest, d / "manifest.yaml")
    write_history(ckpt.history, d / "history.csv")
    return d


def load_checkpoint(directory) -> Checkpoint:
    d = Path(directory)
    man = load_yaml(d / "manifest.yaml")
    if man.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{d}: not a checkpoint directory (format={man.get('format')!r})")
    mcfg = model_config_from_dict(man["model_config"])
    tcfg = train_config_from_dict(man["train_config"])
    model = build_model(mcfg, seed=tcfg.seed)
    arrays = {}
    for e in man["params"]:
        arr, hdr = container.read(d / e["file"])
        if hdr.get("complex"):
            arr = arr[..., 0] + 1j * arr[..., 1]
        arrays[e["name"]] = arr
    model.params.load_arrays(arrays)
    model.params.seed = man.get("init_seed")
    hist = read_history(d / "history.csv") if (d / "history.csv").exists() else []
    norm = Normalizer.from_dict(man["normalizer"]) if man.get("normalizer") else None
    return Checkpoint(mcfg, tcfg, model.params, man.get("dataset_fingerprint"), hist,
                      int(man.get("best_epoch", 0)), norm)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_history(history: list, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([_fmt(row[c]) for c in HISTORY_COLUMNS])


def read_history(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [{"epoch": int(r["epoch"]), "train_loss": float(r["train_loss"]),
             "test_rel_l2": float(r["test_rel_l2"]), "wall_time_s": float(r["wall_time_s"])} for r in rows]


# ---------------------------------------------------------------------------
# training loop

def _check_data(model_cfg: ModelConfig, x: np.ndarray, y: np.ndarray, what: str) -> None:
    if x.ndim != 4 or y.ndim != 4 or x.shape[0] != y.shape[0]:
        raise ValueError(f"{what}: expected matching (N, C, H, W) arrays, got {x.shape} and {y.shape}")
    if x.shape[1] != model_cfg.n_fields:
        raise ValueError(f"{what}: data have {x.shape[1]} field channels, model expects {model_cfg.n_fields}")
    if y.shape[1] != model_cfg.fno.out_channels:
        raise ValueError(f"{what}: targets have {y.shape[1]} channels, model outputs {model_cfg.fno.out_channels}")


def _arrays(data):
    if hasattr(data, "inputs"):
        return data.inputs, data.targets, getattr(data, "fingerprint", None)
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float), None


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, train_data, test_data=None, *,
          out_dir=None, callback=None) -> Checkpoint:
    """Train from scratch; returns the checkpoint with the lowest test error.

    ``train_data``/``test_data`` are :class:`~convfno.pde.dataset.Dataset`
    objects or ``(inputs, targets)`` tuples of raw fields.  Without a test
    set the training loss selects the best epoch.
    """
    model_cfg.validate()
    train_cfg.validate()
    x, y, fp = _arrays(train_data)
    _check_data(model_cfg, x, y, "training set")
    if test_data is not None:
        xt, yt, _ = _arrays(test_data)
        _check_data(model_cfg, xt, yt, "test set")
    model = build_model(model_cfg, seed=train_cfg.seed)
    if isinstance(model, ConvFNO) and x.shape[-1] != model_cfg.train_res:
        raise ValueError(f"training data at {x.shape[-2:]} but the model trains at {model_cfg.train_res}")
    normalizer = Normalizer.fit(x, y) if train_cfg.standardize else None
    loss_fn = LOSSES[train_cfg.loss]
    # shuffle stream is independent of the initialization stream
    rng = np.random.default_rng([train_cfg.seed, 1])
    state = AdamState()
    params = model.params
    names = {id(t): n for n, t in params.items()}
    best = (np.inf, 0, {k: v.data.copy() for k, v in params.items()})
    history = []
    t0 = time.perf_counter()
    N = x.shape[0]
    for epoch in range(1, train_cfg.epochs + 1):
        lr = train_cfg.learning_rate * train_cfg.lr_decay_factor ** ((epoch - 1) // train_cfg.decay_every)
        perm = rng.permutation(N)
        total = 0.0
        for i in range(0, N, train_cfg.batch_size):
            idx = perm[i:i + train_cfg.batch_size]
            with Tape() as tape:
                loss = loss_fn(predict(model, x[idx], normalizer), y[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch starting {i}")
            grads = {names[id(leaf)]: g for leaf, g in tape.backward(loss).items() if id(leaf) in names}
            params.zero_grad()
            adam_step(params, grads, state, lr, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
            total += value * len(idx)
        train_loss = total / N
        if test_data is not None:
            errs = evaluate_model(model, xt, yt, normalizer, batch_size=train_cfg.batch_size)
            score = float(np.nanmean(errs))
        else:
            score = train_loss
        history.append({"epoch": epoch, "train_loss": train_loss, "test_rel_l2": score,
                        "wall_time_s": time.perf_counter() - t0})
        if score < best[0]:
            best = (score, epoch, {k: v.data.copy() for k, v in params.items()})
        log.info("epoch %d lr %.3g train %.5g test %.5g", epoch, lr, train_loss, score)
        if callback is not None:
            callback(history[-1])
    store = copy.deepcopy(params)
    store.load_arrays(best[2])
    for t in store.values():
        t.grad = None
    ckpt = Checkpoint(model_cfg, train_cfg, store, fp, history, best[1], normalizer)
    if out_dir is not None:
        save_checkpoint(ckpt, out_dir)
    return ckpt
