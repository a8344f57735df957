"""Dataset generation and loading in the NOPD container format.

A dataset directory holds ``<split>_input.nopd`` and ``<split>_target.nopd``
for each split.  Series ``i`` (counted across splits, train first) is drawn
from seed ``base_seed + i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import container
from .allen_cahn import SolverSpec, solve_allen_cahn
from .darcy import darcy_coefficient, solve_darcy
from .grf import GRFSpec, grf_coefficients, render
from .navier_stokes import NS_DESK, NS_FINE, solve_ns_vorticity

PDES = ("allen-cahn", "navier-stokes", "darcy")
_CHUNK = 8


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, C, H, W)
    targets: np.ndarray
    header: dict
    fingerprint: str

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def resolution(self) -> int:
        return self.inputs.shape[-1]


def default_params(pde: str, paper_faithful: bool = False) -> dict:
    if pde == "allen-cahn":
        return {"eps": 0.05, "dt": 1e-4, "T": 16.0, "interval": 0.5, "t_start": 0.0, "kmax": None}
    if pde == "navier-stokes":
        spec = NS_FINE if paper_faithful else NS_DESK
        return {"nu": 1e-3, "dt": spec.dt, "T": spec.T, "interval": spec.interval, "t_start": 0.0,
                "forcing": "sinusoidal", "dealias": True, "kmax": None}
    if pde == "darcy":
        return {"variant": "lognormal", "f": 1.0, "tol": 1e-10, "kmax": None}
    raise ValueError(f"unknown PDE {pde!r}; expected one of {PDES}")


def resolve_params(pde: str, params: dict | None = None, paper_faithful: bool = False) -> dict:
    base = default_params(pde, paper_faithful)
    unknown = set(params or {}) - set(base)
    if unknown:
        raise ValueError(f"unknown {pde} parameters: {sorted(unknown)}")
    base.update({k: v for k, v in (params or {}).items() if v is not None})
    return base


def initial_condition(seed: int, m: int, kmax: int | None) -> np.ndarray:
    return render(grf_coefficients(GRFSpec(resolution=m, seed=seed, kmax=kmax)), m)


def generate_series(pde: str, params: dict, seeds, m: int) -> np.ndarray:
    """Stack of trajectories ``(B, S, m, m)``; for Darcy ``(B, 2, m, m)`` holding (a, u)."""
    seeds = list(seeds)
    g = np.stack([initial_condition(s, m, params.get("kmax")) for s in seeds]) if seeds else np.zeros((0, m, m))
    if pde == "allen-cahn":
        # scale each sample into [-1, 1]
        g = g / np.abs(g).max(axis=(1, 2), keepdims=True)
        spec = SolverSpec(params["dt"], params["T"], params["interval"])
        out = [solve_allen_cahn(g[i:i + _CHUNK], params["eps"], spec) for i in range(0, len(g), _CHUNK)]
    elif pde == "navier-stokes":
        spec = SolverSpec(params["dt"], params["T"], params["interval"])
        forcing = params["forcing"] if params["forcing"] == "sinusoidal" else None
        out = [solve_ns_vorticity(g[i:i + _CHUNK], params["nu"], spec, forcing, params["dealias"])
               for i in range(0, len(g), _CHUNK)]
    elif pde == "darcy":
        out = []
        for gi in g:
            a = darcy_coefficient(gi, params["variant"])
            out.append(np.stack([a, solve_darcy(a, params["f"], params["tol"]).u])[None])
    else:
        raise ValueError(f"unknown PDE {pde!r}")
    series = np.concatenate(out) if out else np.zeros((0, 2, m, m))
    if pde != "darcy":
        series = series[:, _first_kept(params):]
    return series


def _first_kept(params: dict) -> int:
    """Index of the first snapshot at or after ``t_start`` (a multiple of the interval)."""
    t0, step = float(params.get("t_start") or 0.0), params["interval"]
    k = int(round(t0 / step))
    if t0 < 0 or abs(k * step - t0) > 1e-9 * max(step, 1.0) or t0 >= params["T"]:
        raise ValueError(f"t_start={t0} must be a multiple of the interval {step} below T={params['T']}")
    return k


def make_pairs(series: np.ndarray, first_pair_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Consecutive-snapshot pairs ``(u_t, u_{t+1})`` per series, in series order."""
    B, S, H, W = series.shape
    if first_pair_only:
        return series[:, 0].reshape(B, 1, H, W), series[:, 1].reshape(B, 1, H, W)
    return (series[:, :-1].reshape(B * (S - 1), 1, H, W),
            series[:, 1:].reshape(B * (S - 1), 1, H, W))


def _fields(pde):
    return {"allen-cahn": (["u"], ["u"]), "navier-stokes": (["w"], ["w"]), "darcy": (["a"], ["u"])}[pde]


def split_paths(directory, split: str) -> tuple[Path, Path]:
    d = Path(directory)
    return d / f"{split}_input.nopd", d / f"{split}_target.nopd"


def build_dataset(pde: str, params: dict | None, n_series: int, seed: int, out_path, *,
                  resolution: int = 64, split: str = "train", series_offset: int = 0,
                  first_pair_only: bool = False, max_pairs: int | None = None,
                  dtype: str = "f64", paper_faithful: bool = False) -> tuple[Path, Path]:
    """Generate ``n_series`` trajectories and write one split of a dataset directory."""
    if n_series < 1:
        raise ValueError("n_series must be >= 1")
    if resolution < 4:
        raise ValueError("resolution must be >= 4")
    params = resolve_params(pde, params, paper_faithful)
    seeds = [seed + series_offset + i for i in range(n_series)]
    series = generate_series(pde, params, seeds, resolution)
    if pde == "darcy":
        x, y = series[:, :1], series[:, 1:2]
    else:
        x, y = make_pairs(series, first_pair_only)
    if max_pairs is not None:
        x, y = x[:max_pairs], y[:max_pairs]
    in_names, out_names = _fields(pde)
    common = {"pde": pde, "params": params, "resolution": resolution, "base_seed": seed,
              "series_offset": series_offset, "n_series": n_series, "split": split,
              "pairs": "first" if first_pair_only else "consecutive"}
    px, py = split_paths(out_path, split)
    container.write(px, x, {**common, "role": "input", "field_names": in_names}, dtype)
    container.write(py, y, {**common, "role": "target", "field_names": out_names}, dtype)
    return px, py


def load_dataset(directory, split: str = "train") -> Dataset:
    px, py = split_paths(directory, split)
    if not px.exists() or not py.exists():
        raise FileNotFoundError(f"{directory}: no '{split}' split (expected {px.name}, {py.name})")
    x, hx = container.read(px)
    y, hy = container.read(py)
    if x.shape[0] != y.shape[0] or x.shape[-2:] != y.shape[-2:]:
        raise ValueError(f"{directory}/{split}: inputs {x.shape} and targets {y.shape} disagree")
    return Dataset(x, y, hx, container.fingerprint(px, py))
