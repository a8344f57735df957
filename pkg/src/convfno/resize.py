"""Periodic resampling between uniform grids x_j = j/m on [0, 1)^2.

Both methods are linear and separable, so each is a pair of small dense
matrices applied along H and W; the backward pass is the transpose.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import ops
from .tensor import Tensor, as_tensor

METHODS = ("bilinear", "fourier")


@functools.lru_cache(maxsize=256)
def bilinear_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Periodic linear interpolation from n_src to n_dst nodes (1-D)."""
    if n_src < 1 or n_dst < 1:
        raise ValueError("grid extents must be >= 1")
    M = np.zeros((n_dst, n_src))
    for i in range(n_dst):
        # source coordinate i * n_src / n_dst, split exactly in integers
        j0, rem = divmod(i * n_src, n_dst)
        t = rem / n_dst
        M[i, j0 % n_src] += 1.0 - t
        if rem:
            M[i, (j0 + 1) % n_src] += t
    M.setflags(write=False)
    return M


@functools.lru_cache(maxsize=256)
def fourier_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Trigonometric interpolation: keep modes below the smaller Nyquist.

    The Nyquist coefficient of the smaller grid is split between +/-k when
    upsampling and folded into one coefficient when downsampling.
    """
    if n_src < 1 or n_dst < 1:
        raise ValueError("grid extents must be >= 1")
    n, N = n_src, n_dst
    c = np.fft.fft(np.eye(n), axis=0) / n  # column j: spectrum of unit impulse j
    d = np.zeros((N, n), dtype=np.complex128)
    M_small = min(n, N)
    kmax = (M_small - 1) // 2
    for k in range(-kmax, kmax + 1):
        d[k % N] = c[k % n]
    if M_small % 2 == 0:
        ny = M_small // 2
        if n < N:
            d[ny] += 0.5 * c[ny]
            d[N - ny] += 0.5 * c[ny]
        elif n > N:
            d[ny] = c[ny] + c[n - ny]
        else:
            d[ny] = c[ny]
    M = np.real(np.fft.ifft(d, axis=0) * N)
    M.setflags(write=False)
    return M


def _matrix(method: str, n_src: int, n_dst: int) -> np.ndarray:
    if method == "bilinear":
        return bilinear_matrix(n_src, n_dst)
    if method == "fourier":
        return fourier_matrix(n_src, n_dst)
    raise ValueError(f"unknown resize method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True)
class ResizeOp:
    method: str
    source_res: tuple[int, int]
    target_res: tuple[int, int]

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown resize method {self.method!r}")
        if min(self.target_res) < 1 or min(self.source_res) < 1:
            raise ValueError("resize extents must be >= 1")

    @property
    def is_identity(self) -> bool:
        return tuple(self.source_res) == tuple(self.target_res)

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return (_matrix(self.method, self.source_res[0], self.target_res[0]),
                _matrix(self.method, self.source_res[1], self.target_res[1]))

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        if tuple(x.shape[-2:]) != tuple(self.source_res):
            raise ValueError(f"input grid {x.shape[-2:]} != resize source {self.source_res}")
        if self.is_identity:
            return x
        mh, mw = self.matrices()
        return ops.separable_linear(x, mh, mw)


def _target(target) -> tuple[int, int]:
    if isinstance(target, int):
        target = (target, target)
    target = tuple(int(t) for t in target)
    if len(target) != 2 or min(target) < 1:
        raise ValueError(f"invalid target resolution {target}")
    return target


def resize(x, target, method: str = "bilinear") -> Tensor:
    x = as_tensor(x)
    return ResizeOp(method, tuple(x.shape[-2:]), _target(target))(x)


def resize_bilinear(x, target) -> Tensor:
    return resize(x, target, "bilinear")


def resize_fourier(x, target) -> Tensor:
    return resize(x, target, "fourier")


def empirical_lipschitz(fn: Callable, pairs: Iterable[tuple[np.ndarray, np.ndarray]]) -> float:
    """max ||fn(a) - fn(b)|| / ||a - b|| over the given probe pairs."""
    best = 0.0
    for a, b in pairs:
        a = np.asarray(a.data if isinstance(a, Tensor) else a)
        b = np.asarray(b.data if isinstance(b, Tensor) else b)
        den = np.linalg.norm(a - b)
        if den == 0.0:
            continue
        fa, fb = fn(a), fn(b)
        fa = fa.data if isinstance(fa, Tensor) else fa
        fb = fb.data if isinstance(fb, Tensor) else fb
        best = max(best, float(np.linalg.norm(fa - fb) / den))
    return best
