"""Gaussian random fields on the periodic unit square.

The covariance is ``sigma * (-Lap + tau^2)^(-alpha)``, so the per-mode
coefficient of a sample has variance

    lambda_k = sigma * (4 pi^2 |k|^2 + tau^2)^(-alpha)

under the per-mode FFT normalization used throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GRFSpec:
    resolution: int = 64
    seed: int = 0
    tau: float = 7.0
    alpha: float = 2.5
    sigma: float = 7.0 ** 1.5
    zero_mean: bool = False
    # Band limit |k_x|, |k_y| <= kmax.  None keeps every mode the grid holds.
    kmax: int | None = None

    def validate(self) -> None:
        if self.resolution < 4:
            raise ValueError("GRF resolution must be >= 4")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1 in two dimensions")
        if self.kmax is not None and not (0 <= self.kmax < self.resolution / 2):
            raise ValueError(f"kmax={self.kmax} must lie below the Nyquist index of m={self.resolution}")


def eigenvalues(kx, ky, tau=7.0, alpha=2.5, sigma=7.0 ** 1.5):
    k2 = np.asarray(kx, dtype=float) ** 2 + np.asarray(ky, dtype=float) ** 2
    return sigma * (4.0 * np.pi ** 2 * k2 + tau ** 2) ** (-alpha)


def _hermitian_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Complex standard normals on an n x n FFT grid with xi[-k] = conj(xi[k]).

    Modes that are their own conjugate (DC, Nyquist) come out real with unit
    variance; all others have E|xi|^2 = 1.
    """
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    neg = (-np.arange(n)) % n
    return (z + np.conj(z[np.ix_(neg, neg)])) / np.sqrt(2.0)


def grf_coefficients(spec: GRFSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Full-plane coefficients on the FFT grid of the sample.

    With a band limit the noise lives on a (2*kmax+2)^2 grid, so the same
    seed yields the same continuous function regardless of ``resolution``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n = spec.resolution if spec.kmax is None else 2 * spec.kmax + 2
    xi = _hermitian_noise(rng, n)
    k = np.fft.fftfreq(n, d=1.0 / n)
    coeffs = np.sqrt(eigenvalues(k[:, None], k[None, :], spec.tau, spec.alpha, spec.sigma)) * xi
    if spec.kmax is not None:
        coeffs[np.abs(k) > spec.kmax, :] = 0.0
        coeffs[:, np.abs(k) > spec.kmax] = 0.0
    if spec.zero_mean:
        coeffs[0, 0] = 0.0
    return coeffs


def render(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Evaluate the trigonometric polynomial with these coefficients on the m x m grid."""
    n = coeffs.shape[0]
    if m == n:
        full = coeffs
    else:
        kmax = (n - 2) // 2
        if kmax >= m / 2:
            raise ValueError(f"grid {m} cannot carry modes up to {kmax}")
        k = np.arange(-kmax, kmax + 1)
        full = np.zeros((m, m), dtype=np.complex128)
        full[np.ix_(k % m, k % m)] = coeffs[np.ix_(k % n, k % n)]
    field = np.fft.ifft2(full) * (m * m)
    residue = np.abs(field.imag).max()
    if residue > 1e-12 * max(1.0, np.abs(field.real).max()):
        raise ArithmeticError(f"GRF synthesis is not real (imaginary residue {residue:.3e})")
    return np.ascontiguousarray(field.real)


def grf_sample(spec: GRFSpec) -> np.ndarray:
    return render(grf_coefficients(spec), spec.resolution)


def grf_batch(n: int, resolution: int, base_seed: int = 0, **kw) -> np.ndarray:
    """n samples, sample i drawn from seed ``base_seed + i``."""
    return np.stack([grf_sample(GRFSpec(resolution=resolution, seed=base_seed + i, **kw)) for i in range(n)])
