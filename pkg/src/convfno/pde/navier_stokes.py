"""2-D incompressible Navier-Stokes in vorticity form on the periodic unit square.

    w_t + u w_x + v w_y = nu Lap w + f,   u = psi_y, v = -psi_x, -Lap psi = w

Pseudo-spectral in space; the advection term is formed on the grid in
divergence form and dealiased with the 2/3 rule, forcing is explicit and
diffusion is Crank-Nicolson.  Array axis 0 is x, axis 1 is y.
"""
from __future__ import annotations

import numpy as np

from .allen_cahn import BLOWUP, BlowUpError, SolverSpec

NS_DESK = SolverSpec(dt=1e-3, T=49.5, interval=0.5)
NS_FINE = SolverSpec(dt=1e-4, T=49.5, interval=0.5)


def sinusoidal_forcing(m: int) -> np.ndarray:
    x = np.arange(m) / m
    s = x[:, None] + x[None, :]
    return 0.1 * (np.sin(2 * np.pi * s) + np.cos(2 * np.pi * s))


def _wavenumbers(m: int):
    kx = np.fft.fftfreq(m, d=1.0 / m)[:, None]
    ky = np.fft.rfftfreq(m, d=1.0 / m)[None, :]
    # first derivatives drop the Nyquist mode (its sign is ambiguous)
    dkx = np.where(np.abs(kx) == m // 2, 0.0, kx) if m % 2 == 0 else kx
    dky = np.where(ky == m // 2, 0.0, ky) if m % 2 == 0 else ky
    return kx, ky, dkx, dky


def solve_ns_vorticity(w0: np.ndarray, nu: float, spec: SolverSpec = NS_DESK,
                       forcing: np.ndarray | None | str = "sinusoidal", dealias: bool = True) -> np.ndarray:
    """Vorticity snapshots ``(S, m, m)`` (or ``(B, S, m, m)``) every ``spec.interval``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    w = np.array(w0, dtype=np.float64, copy=True)
    single = w.ndim == 2
    if single:
        w = w[None]
    if w.ndim != 3 or w.shape[1] != w.shape[2]:
        raise ValueError(f"expected (m, m) or (B, m, m) vorticity, got {np.shape(w0)}")
    B, m, _ = w.shape
    if isinstance(forcing, str):
        if forcing != "sinusoidal":
            raise ValueError(f"unknown forcing {forcing!r}")
        forcing = sinusoidal_forcing(m)
    nsteps = spec.steps_per_snapshot()
    S = spec.n_snapshots()
    dt = spec.dt

    kx, ky, dkx, dky = _wavenumbers(m)
    lap = -4.0 * np.pi ** 2 * (kx ** 2 + ky ** 2)
    inv_lap = np.zeros_like(lap)
    inv_lap[lap != 0] = 1.0 / lap[lap != 0]
    ikx = 2j * np.pi * dkx
    iky = 2j * np.pi * dky
    if dealias:
        keep = (np.abs(kx) <= m / 3.0) & (ky <= m / 3.0)
    else:
        keep = np.ones(lap.shape, dtype=bool)
    # fft of the forcing; its mean is zero analytically, so pin it exactly
    f_h = np.zeros(lap.shape, dtype=np.complex128)
    if forcing is not None:
        f_h = np.fft.rfft2(np.asarray(forcing, dtype=float))
        f_h[0, 0] = 0.0
    cn_num = 1.0 + 0.5 * dt * nu * lap
    cn_den = 1.0 / (1.0 - 0.5 * dt * nu * lap)

    # continuous max principle: |w(t)| <= max|w0| + t max|f|; twice that plus
    # a margin flags a numerical blow-up
    f_max = 0.0 if forcing is None else float(np.abs(forcing).max())
    bound = 2.0 * (float(np.abs(w).max()) + spec.T * f_max)
    w_h = np.fft.rfft2(w)
    snaps = np.empty((B, S, m, m))
    snaps[:, 0] = w
    for s in range(1, S):
        for _ in range(nsteps):
            psi_h = -inv_lap * w_h
            u = np.fft.irfft2(iky * psi_h, s=(m, m))
            v = np.fft.irfft2(-ikx * psi_h, s=(m, m))
            wg = np.fft.irfft2(w_h, s=(m, m))
            adv = ikx * np.fft.rfft2(u * wg) + iky * np.fft.rfft2(v * wg)
            adv *= keep
            w_h = (w_h * cn_num + dt * (f_h - adv)) * cn_den
        snap = np.fft.irfft2(w_h, s=(m, m))
        peak = np.abs(snap).max(axis=(1, 2))
        if not np.all(np.isfinite(peak)) or np.any(peak > bound + BLOWUP):
            raise BlowUpError(f"Navier-Stokes blew up before t={s * spec.interval:g} "
                              f"(max |w| = {np.nanmax(peak):.3g}, dt={dt:g}, nu={nu:g}, m={m})")
        snaps[:, s] = snap
    return snaps[0] if single else snaps
