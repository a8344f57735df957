"""Architecture and training configuration.

Field names follow the FNO hyperparameter tables (n_modes_height,
lifting_channels, ...). Files are YAML (JSON is accepted as a subset).
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

MODEL_KINDS = ("fno", "toy-convfno", "unet-fno")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FNOConfig:
    n_modes_height: int = 16
    n_modes_width: int = 16
    in_channels: int = 3
    lifting_channels: int = 64
    hidden_channels: int = 32
    out_channels: int = 1
    projection_channels: int = 64
    n_layers: int = 4
    norm: str | None = "group_norm"
    norm_groups: int = 4
    skip: str = "linear"
    use_mlp: bool = True
    mlp_expansion: float = 1.0
    factorization: str | None = None
    rank: float = 1.0

    def validate(self) -> None:
        for name in ("n_modes_height", "n_modes_width", "in_channels", "lifting_channels",
                     "hidden_channels", "out_channels", "projection_channels", "n_layers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.norm not in (None, "group_norm"):
            raise ConfigError(f"unsupported norm {self.norm!r}")
        if self.norm == "group_norm" and self.hidden_channels % self.norm_groups:
            raise ConfigError(f"hidden_channels {self.hidden_channels} not divisible by {self.norm_groups} groups")
        if self.skip != "linear":
            raise ConfigError(f"unsupported skip {self.skip!r}")
        if self.mlp_expansion <= 0:
            raise ConfigError("mlp_expansion must be positive")
        fac = (self.factorization or "dense").lower()
        if fac not in ("dense", "tucker"):
            raise ConfigError(f"unsupported factorization {self.factorization!r}")
        if fac == "tucker":
            if float(self.rank) != 1.0:
                raise ConfigError("only full-rank (rank 1.0) spectral weights are supported")
            warnings.warn("factorization 'Tucker' at rank 1.0 is stored as dense spectral weights", stacklevel=3)

    @property
    def modes(self) -> tuple[int, int]:
        return (self.n_modes_height, self.n_modes_width)

    @property
    def mlp_channels(self) -> int:
        return max(1, int(round(self.hidden_channels * self.mlp_expansion)))


@dataclass(frozen=True)
class ToyCNNConfig:
    branch_kernel_sizes: tuple[int, ...] = (3, 9)
    branch_channels: int = 8
    post_kernel_sizes: tuple[int, ...] = (5, 3)
    out_channels: int = 16

    def validate(self) -> None:
        if not self.branch_kernel_sizes:
            raise ConfigError("at least one branch kernel size is required")
        for k in tuple(self.branch_kernel_sizes) + tuple(self.post_kernel_sizes):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel sizes must be odd and positive, got {k}")
        if self.branch_channels < 1 or self.out_channels < 1:
            raise ConfigError("channel counts must be positive")


@dataclass(frozen=True)
class UNetConfig:
    base_channels: int = 16
    depth: int = 3
    out_channels: int = 32

    def validate(self) -> None:
        if self.base_channels < 1 or self.depth < 1 or self.out_channels < 1:
            raise ConfigError("UNet sizes must be positive")

    @property
    def divisor(self) -> int:
        return 2 ** self.depth


@dataclass(frozen=True)
class ModelConfig:
    model: str = "unet-fno"
    n_fields: int = 1
    use_coords: bool = True
    cnn_use_coords: bool = True
    train_res: int = 64
    resize_method: str = "bilinear"
    fno: FNOConfig = field(default_factory=FNOConfig)
    cnn: ToyCNNConfig | UNetConfig | None = field(default_factory=UNetConfig)

    @property
    def c0(self) -> int:
        return self.n_fields + (2 if self.use_coords else 0)

    @property
    def cnn_in_channels(self) -> int:
        return self.n_fields + (2 if self.use_coords and self.cnn_use_coords else 0)

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model!r}; expected one of {MODEL_KINDS}")
        if self.resize_method not in ("bilinear", "fourier"):
            raise ConfigError(f"unknown resize method {self.resize_method!r}")
        if self.n_fields < 1 or self.train_res < 1:
            raise ConfigError("n_fields and train_res must be positive")
        self.fno.validate()
        if self.fno.in_channels != self.c0:
            raise ConfigError(f"fno.in_channels={self.fno.in_channels} but data provide c0={self.c0} channels")
        if self.model == "fno":
            if self.cnn is not None:
                raise ConfigError("plain FNO takes no cnn section")
        elif self.model == "toy-convfno":
            if not isinstance(self.cnn, ToyCNNConfig):
                raise ConfigError("toy-convfno needs a toy cnn section")
            self.cnn.validate()
        else:
            if not isinstance(self.cnn, UNetConfig):
                raise ConfigError("unet-fno needs a unet cnn section")
            self.cnn.validate()
            if self.train_res % self.cnn.divisor:
                raise ConfigError(f"train_res {self.train_res} not divisible by {self.cnn.divisor}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 100
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int | None = None  # epochs; None -> a quarter of the run
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    loss: str = "relative_l2"
    standardize: bool = False

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0 or not (0 < self.lr_decay_factor <= 1):
            raise ConfigError("adam_eps must be positive and lr_decay_factor in (0, 1]")
        if self.loss not in ("relative_l2", "absolute_l2", "mse"):
            raise ConfigError(f"unknown loss {self.loss!r}")

    @property
    def decay_every(self) -> int:
        if self.lr_decay_every:
            return int(self.lr_decay_every)
        return max(1, self.epochs // 4)


# ---------------------------------------------------------------------------
# (de)serialization

def _from_dict(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(data)
    for key in ("branch_kernel_sizes", "post_kernel_sizes"):
        if key in kwargs:
            kwargs[key] = tuple(int(k) for k in kwargs[key])
    return cls(**kwargs)


def model_config_from_dict(data: dict) -> ModelConfig:
    data = dict(data)
    kind = data.get("model", "unet-fno")
    fno = _from_dict(FNOConfig, data.pop("fno", {}) or {})
    cnn_data = data.pop("cnn", None)
    if kind == "fno":
        cnn = None
    elif kind == "toy-convfno":
        cnn = _from_dict(ToyCNNConfig, cnn_data or {})
    else:
        cnn = _from_dict(UNetConfig, cnn_data or {})
    if isinstance(data.get("resize"), dict):
        data["resize_method"] = data.pop("resize").get("method", "bilinear")
    cfg = _from_dict(ModelConfig, {**data, "fno": fno, "cnn": cnn})
    cfg.validate()
    return cfg


def model_config_to_dict(cfg: ModelConfig) -> dict:
    out = dataclasses.asdict(cfg)
    if out.get("cnn"):
        for key in ("branch_kernel_sizes", "post_kernel_sizes"):
            if key in out["cnn"]:
                out["cnn"][key] = list(out["cnn"][key])
    out["resize"] = {"method": out.pop("resize_method")}
    return out


def train_config_from_dict(data: dict) -> TrainConfig:
    cfg = _from_dict(TrainConfig, data or {})
    cfg.validate()
    return cfg


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_yaml(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def load_model_config(path) -> ModelConfig:
    return model_config_from_dict(load_yaml(path))


def load_train_config(path) -> TrainConfig:
    return train_config_from_dict(load_yaml(path))


def dump_yaml(data: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")


def desk_model_config(kind: str = "unet-fno", n_fields: int = 1, **overrides) -> ModelConfig:
    """The CPU-sized defaults: 16x16 modes, width 32, lift/project 64, 4 blocks, 64^2 grid."""
    use_coords = overrides.pop("use_coords", True)
    fno_over = overrides.pop("fno", {})
    cnn = overrides.pop("cnn", None)
    fno = FNOConfig(in_channels=n_fields + (2 if use_coords else 0), **fno_over)
    if cnn is None:
        cnn = {"fno": None, "toy-convfno": ToyCNNConfig(), "unet-fno": UNetConfig()}[kind]
    cfg = ModelConfig(model=kind, n_fields=n_fields, use_coords=use_coords, fno=fno, cnn=cnn, **overrides)
    cfg.validate()
    return cfg
