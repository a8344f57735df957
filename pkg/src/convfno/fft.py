"""Per-mode normalized real 2D FFT.

Coefficient ``k`` is ``(1/(H*W)) * sum_x f(x) exp(-2 pi i k.x / m)``, so the
DC coefficient is the grid mean and a retained coefficient describes the
same continuous mode at every resolution that resolves it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class Spectrum:
    coeffs: np.ndarray  # complex, (..., H, W//2 + 1)
    shape_spatial: tuple[int, int]

    def __post_init__(self):
        H, W = self.shape_spatial
        if self.coeffs.shape[-2:] != (H, W // 2 + 1):
            raise ValueError(f"coefficients {self.coeffs.shape} inconsistent with spatial shape {(H, W)}")

    @property
    def dc(self) -> np.ndarray:
        return self.coeffs[..., 0, 0]


def _array(field) -> np.ndarray:
    return field.data if isinstance(field, Tensor) else np.asarray(field, dtype=np.float64)


def rfft2(field) -> Spectrum:
    x = _array(field)
    if x.ndim < 2:
        raise ValueError(f"rfft2 needs a trailing (H, W) shape, got {x.shape}")
    H, W = x.shape[-2:]
    return Spectrum(np.fft.rfft2(x) / (H * W), (H, W))


def irfft2(spec: Spectrum | np.ndarray, shape: tuple[int, int]) -> Tensor:
    coeffs = spec.coeffs if isinstance(spec, Spectrum) else np.asarray(spec)
    H, W = shape
    if coeffs.ndim < 2 or coeffs.shape[-2:] != (H, W // 2 + 1):
        raise ValueError(f"coefficients {coeffs.shape} do not match spatial shape {(H, W)}")
    if isinstance(spec, Spectrum) and tuple(spec.shape_spatial) != (H, W):
        raise ValueError(f"spectrum was taken on {spec.shape_spatial}, not {(H, W)}")
    return Tensor(np.fft.irfft2(coeffs, s=(H, W)) * (H * W))


def wavenumbers(n: int) -> np.ndarray:
    """Signed integer wavenumbers in FFT order."""
    return np.fft.fftfreq(n, d=1.0 / n)


def grid(m: int) -> np.ndarray:
    """Periodic nodes j/m on [0, 1), no duplicated endpoint."""
    return np.arange(m) / m
