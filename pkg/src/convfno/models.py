"""FNO, the two CNN pre-extractors, and their Conv-FNO composition.

A Conv-FNO evaluates ``fno(concat(x, cnn(x)))``: CNN features are appended
to the (coordinate-augmented) input along the channel axis before the FNO
sees it. Off the training grid there are two evaluation schemes:

* scheme 1 resamples the input to the training grid, runs the whole model
  there, and resamples the output back;
* scheme 2 runs only the CNN on the training grid and resamples its
  features to the query grid; the FNO runs at the query resolution on the
  untouched input.

Inputs to the model classes are raw PDE fields ``(B, n_fields, H, W)``;
coordinate channels are generated on whatever grid the data live on.
"""
from __future__ import annotations

import dataclasses
from collections import OrderedDict

import numpy as np

from . import ops
from .config import FNOConfig, ModelConfig, ToyCNNConfig, UNetConfig
from .resize import ResizeOp
from .tensor import Tensor, as_tensor


class ParamStore(OrderedDict):
    """Named parameter tensors, in creation order."""

    def __init__(self, *args, seed: int | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.seed = seed

    def num_params(self) -> int:
        return int(sum(t.size * (2 if t.is_complex else 1) for t in self.values()))

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self) - set(arrays)
        extra = set(arrays) - set(self)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, t in self.items():
            a = np.asarray(arrays[k])
            if a.shape != t.shape:
                raise ValueError(f"{k}: shape {a.shape} != {t.shape}")
            t.data = a.astype(t.dtype, copy=True)

    def zero_grad(self) -> None:
        for t in self.values():
            t.grad = None


# ---------------------------------------------------------------------------
# initialization helpers

def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _add(store: ParamStore, name: str, arr) -> Tensor:
    t = Tensor(arr, requires_grad=True, name=name)
    store[name] = t
    return t


def _linear(store, rng, name, c_in, c_out, bias=True):
    _add(store, f"{name}.weight", _uniform(rng, (c_out, c_in), c_in))
    if bias:
        _add(store, f"{name}.bias", _uniform(rng, (c_out,), c_in))


def _conv(store, rng, name, c_in, c_out, k, bias=False):
    fan = c_in * k * k
    _add(store, f"{name}.weight", _uniform(rng, (c_out, c_in, k, k), fan))
    if bias:
        _add(store, f"{name}.bias", _uniform(rng, (c_out,), fan))


def _conv_t(store, rng, name, c_in, c_out, bias=True):
    fan = c_out * 4
    _add(store, f"{name}.weight", _uniform(rng, (c_in, c_out, 2, 2), fan))
    if bias:
        _add(store, f"{name}.bias", _uniform(rng, (c_out,), fan))


def _norm(store, name, c):
    _add(store, f"{name}.gamma", np.ones(c))
    _add(store, f"{name}.beta", np.zeros(c))


def coordinate_channels(batch: int, H: int, W: int) -> np.ndarray:
    """Channels (x, y) with x = i/H along axis -2 and y = j/W along axis -1."""
    gx, gy = np.meshgrid(np.arange(H) / H, np.arange(W) / W, indexing="ij")
    return np.broadcast_to(np.stack([gx, gy])[None], (batch, 2, H, W)).copy()


def with_coords(fields) -> Tensor:
    fields = as_tensor(fields)
    B, _, H, W = fields.shape
    return ops.concat_channels(fields, Tensor(coordinate_channels(B, H, W)))


# ---------------------------------------------------------------------------
# FNO

def init_fno(cfg: FNOConfig, rng: np.random.Generator, prefix: str = "fno", store=None) -> ParamStore:
    cfg.validate()
    store = ParamStore() if store is None else store
    h = cfg.hidden_channels
    _linear(store, rng, f"{prefix}.lift0", cfg.in_channels, cfg.lifting_channels)
    _linear(store, rng, f"{prefix}.lift1", cfg.lifting_channels, h)
    mh, mw = cfg.modes
    scale = 1.0 / (h * h)
    for i in range(cfg.n_layers):
        p = f"{prefix}.block{i}"
        shape = (h, h, 2 * mh - 1, mw)
        _add(store, f"{p}.spectral.weight", scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)))
        _linear(store, rng, f"{p}.skip", h, h, bias=False)
        if cfg.norm:
            _norm(store, f"{p}.norm0", h)
        if cfg.use_mlp:
            _linear(store, rng, f"{p}.mlp0", h, cfg.mlp_channels)
            _linear(store, rng, f"{p}.mlp1", cfg.mlp_channels, h)
            _linear(store, rng, f"{p}.mlp_skip", h, h, bias=False)
            if cfg.norm:
                _norm(store, f"{p}.norm1", h)
    _linear(store, rng, f"{prefix}.proj0", h, cfg.projection_channels)
    _linear(store, rng, f"{prefix}.proj1", cfg.projection_channels, cfg.out_channels)
    return store


def _lin(params, name, x):
    return ops.pointwise_linear(x, params[f"{name}.weight"], params.get(f"{name}.bias"))


def _maybe_norm(cfg, params, name, x):
    if not cfg.norm:
        return x
    return ops.group_norm(x, params[f"{name}.gamma"], params[f"{name}.beta"], cfg.norm_groups)


def fno_lift(cfg: FNOConfig, params, x, prefix="fno") -> Tensor:
    return _lin(params, f"{prefix}.lift1", ops.gelu(_lin(params, f"{prefix}.lift0", x)))


def fno_block(cfg: FNOConfig, params, x, i: int, prefix="fno") -> Tensor:
    p = f"{prefix}.block{i}"
    last = i == cfg.n_layers - 1
    y = ops.spectral_conv(x, params[f"{p}.spectral.weight"], cfg.modes)
    x = ops.add(_maybe_norm(cfg, params, f"{p}.norm0", y), _lin(params, f"{p}.skip", x))
    if cfg.use_mlp or not last:
        x = ops.gelu(x)
    if cfg.use_mlp:
        y = _lin(params, f"{p}.mlp1", ops.gelu(_lin(params, f"{p}.mlp0", x)))
        x = ops.add(_maybe_norm(cfg, params, f"{p}.norm1", y), _lin(params, f"{p}.mlp_skip", x))
        if not last:
            x = ops.gelu(x)
    return x


def fno_forward(cfg: FNOConfig, params, x, prefix: str = "fno") -> Tensor:
    """Lift, ``n_layers`` Fourier blocks, project. ``x`` already holds all c0 channels."""
    x = as_tensor(x)
    if x.shape[1] != cfg.in_channels:
        raise ValueError(f"FNO expects {cfg.in_channels} input channels, got {x.shape[1]}")
    H, W = x.shape[-2:]
    if cfg.n_modes_height > H // 2 + 1 or cfg.n_modes_width > W // 2 + 1:
        raise ValueError(f"modes {cfg.modes} exceed the Nyquist limit of a {H}x{W} grid")
    x = fno_lift(cfg, params, x, prefix)
    for i in range(cfg.n_layers):
        x = fno_block(cfg, params, x, i, prefix)
    return _lin(params, f"{prefix}.proj1", ops.gelu(_lin(params, f"{prefix}.proj0", x)))


# ---------------------------------------------------------------------------
# toy CNN: parallel multi-scale branches fused by a 1x1 conv

def init_toy_cnn(cfg: ToyCNNConfig, c_in: int, rng, prefix="cnn", store=None) -> ParamStore:
    cfg.validate()
    store = ParamStore() if store is None else store
    kb = cfg.branch_channels
    for bi, k in enumerate(cfg.branch_kernel_sizes):
        _conv(store, rng, f"{prefix}.branch{bi}.conv0", c_in, kb, k)
        for j, kp in enumerate(cfg.post_kernel_sizes):
            _conv(store, rng, f"{prefix}.branch{bi}.conv{j + 1}", kb, kb, kp)
    _conv(store, rng, f"{prefix}.fuse", kb * len(cfg.branch_kernel_sizes), cfg.out_channels, 1, bias=True)
    return store


def toy_cnn_forward(cfg: ToyCNNConfig, params, x, prefix="cnn") -> Tensor:
    cfg.validate()
    feats = []
    for bi in range(len(cfg.branch_kernel_sizes)):
        h = x
        for j in range(1 + len(cfg.post_kernel_sizes)):
            h = ops.relu(ops.conv2d_circular(h, params[f"{prefix}.branch{bi}.conv{j}.weight"]))
        feats.append(h)
    return ops.conv2d_circular(ops.concat_channels(*feats), params[f"{prefix}.fuse.weight"],
                               params.get(f"{prefix}.fuse.bias"))


# ---------------------------------------------------------------------------
# UNet: 3 encoders, bottleneck, 3 decoders with concatenated skips

def _unet_widths(cfg: UNetConfig) -> list[int]:
    return [cfg.base_channels * 2 ** i for i in range(cfg.depth + 1)]


def init_unet(cfg: UNetConfig, c_in: int, rng, prefix="cnn", store=None) -> ParamStore:
    cfg.validate()
    store = ParamStore() if store is None else store
    widths = _unet_widths(cfg)
    prev = c_in
    for i, c in enumerate(widths):  # last entry is the bottleneck
        _conv(store, rng, f"{prefix}.down{i}.conv0", prev, c, 3)
        _conv(store, rng, f"{prefix}.down{i}.conv1", c, c, 3)
        prev = c
    for i in reversed(range(cfg.depth)):
        c = widths[i]
        _conv_t(store, rng, f"{prefix}.up{i}.tconv", widths[i + 1], c)
        _conv(store, rng, f"{prefix}.up{i}.conv0", 2 * c, c, 3)
        _conv(store, rng, f"{prefix}.up{i}.conv1", c, c, 3)
    _conv(store, rng, f"{prefix}.out", widths[0], cfg.out_channels, 1, bias=True)
    return store


def _double_conv(params, name, x):
    x = ops.relu(ops.conv2d_circular(x, params[f"{name}.conv0.weight"]))
    return ops.relu(ops.conv2d_circular(x, params[f"{name}.conv1.weight"]))


def unet_forward(cfg: UNetConfig, params, x, prefix="cnn", trace: list | None = None) -> Tensor:
    x = as_tensor(x)
    H, W = x.shape[-2:]
    if H % cfg.divisor or W % cfg.divisor:
        raise ValueError(f"UNet input extents {(H, W)} must be divisible by {cfg.divisor}")
    skips = []
    for i in range(cfg.depth):
        x = _double_conv(params, f"{prefix}.down{i}", x)
        if trace is not None:
            trace.append(x.shape[-2:])
        skips.append(x)
        x = ops.max_pool2(x)
    x = _double_conv(params, f"{prefix}.down{cfg.depth}", x)
    if trace is not None:
        trace.append(x.shape[-2:])
    for i in reversed(range(cfg.depth)):
        x = ops.conv_transpose2(x, params[f"{prefix}.up{i}.tconv.weight"], params.get(f"{prefix}.up{i}.tconv.bias"))
        x = _double_conv(params, f"{prefix}.up{i}", ops.concat_channels(skips[i], x))
    return ops.conv2d_circular(x, params[f"{prefix}.out.weight"], params.get(f"{prefix}.out.bias"))


# ---------------------------------------------------------------------------
# model objects

class FNO:
    """Plain FNO on raw fields (coordinates appended internally)."""

    kind = "fno"

    def __init__(self, config: ModelConfig, seed: int = 0, params: ParamStore | None = None):
        config.validate()
        self.config = config
        self.fno_config = config.fno
        self.params = params if params is not None else init_fno(config.fno, np.random.default_rng(seed))
        self.params.seed = seed

    def inputs(self, fields) -> Tensor:
        fields = as_tensor(fields)
        if fields.shape[1] != self.config.n_fields:
            raise ValueError(f"expected {self.config.n_fields} field channels, got {fields.shape[1]}")
        return with_coords(fields) if self.config.use_coords else fields

    def __call__(self, fields) -> Tensor:
        return fno_forward(self.fno_config, self.params, self.inputs(fields))

    def evaluate(self, fields, scheme: int = 2, method: str | None = None) -> Tensor:
        # resolution handling lives inside the spectral layers
        return self(fields)


class ConvFNO(FNO):
    """``fno(concat(x, cnn(x)))`` with a toy multi-branch CNN or a UNet."""

    def __init__(self, config: ModelConfig, seed: int = 0, params: ParamStore | None = None):
        config.validate()
        if config.model == "fno":
            raise ValueError("use FNO for model kind 'fno'")
        self.config = config
        self.kind = config.model
        k = config.cnn.out_channels
        self.fno_config = dataclasses.replace(config.fno, in_channels=config.c0 + k)
        if params is None:
            rng = np.random.default_rng(seed)
            params = ParamStore()
            if isinstance(config.cnn, ToyCNNConfig):
                init_toy_cnn(config.cnn, config.cnn_in_channels, rng, store=params)
            else:
                init_unet(config.cnn, config.cnn_in_channels, rng, store=params)
            init_fno(self.fno_config, rng, store=params)
        self.params = params
        self.params.seed = seed

    @property
    def train_res(self) -> int:
        return self.config.train_res

    def cnn(self, fields) -> Tensor:
        fields = as_tensor(fields)
        x = with_coords(fields) if (self.config.use_coords and self.config.cnn_use_coords) else fields
        if isinstance(self.config.cnn, ToyCNNConfig):
            return toy_cnn_forward(self.config.cnn, self.params, x)
        return unet_forward(self.config.cnn, self.params, x)

    def fno(self, x) -> Tensor:
        return fno_forward(self.fno_config, self.params, x)

    def __call__(self, fields) -> Tensor:
        """Native forward on the training grid."""
        fields = as_tensor(fields)
        m = self.train_res
        if tuple(fields.shape[-2:]) != (m, m):
            raise ValueError(f"input grid {fields.shape[-2:]} != training grid {(m, m)}; use a resizing scheme")
        return self.fno(ops.concat_channels(self.inputs(fields), self.cnn(fields)))

    def _resizer(self, src, dst, method):
        return ResizeOp(method or self.config.resize_method, tuple(src), tuple(dst))

    def eval_scheme1(self, fields, method: str | None = None) -> Tensor:
        fields = as_tensor(fields)
        query = tuple(fields.shape[-2:])
        m = (self.train_res, self.train_res)
        out = self(self._resizer(query, m, method)(fields))
        return self._resizer(m, query, method)(out)

    def eval_scheme2(self, fields, method: str | None = None) -> Tensor:
        fields = as_tensor(fields)
        query = tuple(fields.shape[-2:])
        m = (self.train_res, self.train_res)
        H, W = query
        if self.fno_config.n_modes_height > H // 2 + 1 or self.fno_config.n_modes_width > W // 2 + 1:
            raise ValueError(f"query grid {query} cannot resolve the FNO's {self.fno_config.modes} modes")
        feats = self.cnn(self._resizer(query, m, method)(fields))
        feats = self._resizer(m, query, method)(feats)
        return self.fno(ops.concat_channels(self.inputs(fields), feats))

    def evaluate(self, fields, scheme: int = 2, method: str | None = None) -> Tensor:
        if scheme == 1:
            return self.eval_scheme1(fields, method)
        if scheme == 2:
            return self.eval_scheme2(fields, method)
        raise ValueError(f"unknown scheme {scheme}")


def build_model(config: ModelConfig, seed: int = 0, params: ParamStore | None = None):
    return FNO(config, seed, params) if config.model == "fno" else ConvFNO(config, seed, params)


def init_params(config: ModelConfig, seed: int) -> ParamStore:
    return build_model(config, seed).params


def embed_fno(fno_model: FNO, cnn_config, kind: str | None = None, seed: int = 0) -> ConvFNO:
    """Conv-FNO that reproduces ``fno_model`` exactly under scheme 2.

    The CNN's final layer is zeroed, and the FNO's first lifting layer gets
    zero columns for the appended feature channels; everything else is copied.
    """
    src = fno_model.config
    if kind is None:
        kind = "toy-convfno" if isinstance(cnn_config, ToyCNNConfig) else "unet-fno"
    cfg = dataclasses.replace(src, model=kind, cnn=cnn_config)
    model = ConvFNO(cfg, seed=seed)
    final = "cnn.fuse" if kind == "toy-convfno" else "cnn.out"
    model.params[f"{final}.weight"].data[...] = 0.0
    if f"{final}.bias" in model.params:
        model.params[f"{final}.bias"].data[...] = 0.0
    for name, t in fno_model.params.items():
        dst = model.params[name]
        if name == "fno.lift0.weight":
            w = np.zeros(dst.shape)
            w[:, : t.shape[1]] = t.data
            dst.data = w
        else:
            dst.data = t.data.copy()
    return model
