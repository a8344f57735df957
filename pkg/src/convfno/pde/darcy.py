"""Steady Darcy flow ``-div(a grad u) = f`` on [0, 1]^2 with u = 0 on the boundary.

Vertex-centred grid x_i = i / (m - 1), 5-point stencil with harmonic-mean
face coefficients, Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .grf import GRFSpec, grf_sample


class ConvergenceError(RuntimeError):
    pass


@dataclass
class DarcySolution:
    u: np.ndarray
    iterations: int
    residual: float  # ||A u - f|| / ||f|| over interior nodes


def face_coefficients(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic means between x-neighbours (ax[i, j] ~ i+1/2) and y-neighbours."""
    ax = np.zeros_like(a)
    ay = np.zeros_like(a)
    ax[:-1] = 2.0 * a[:-1] * a[1:] / (a[:-1] + a[1:])
    ay[:, :-1] = 2.0 * a[:, :-1] * a[:, 1:] / (a[:, :-1] + a[:, 1:])
    return ax, ay


def _interior(x: np.ndarray) -> np.ndarray:
    return x[1:-1, 1:-1]


def solve_darcy(a: np.ndarray, f=1.0, tol: float = 1e-10, max_iter: int | None = None) -> DarcySolution:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 3:
        raise ValueError(f"coefficient must be an (m, m) array with m >= 3, got {a.shape}")
    if not np.all(a > 0) or not np.all(np.isfinite(a)):
        raise ValueError("Darcy coefficient must be finite and strictly positive")
    m = a.shape[0]
    h = 1.0 / (m - 1)
    inv_h2 = 1.0 / (h * h)
    ax, ay = face_coefficients(a)
    rhs = np.zeros((m, m))
    rhs[1:-1, 1:-1] = np.broadcast_to(np.asarray(f, dtype=float), (m, m))[1:-1, 1:-1]
    u = np.zeros((m, m))
    fnorm = np.linalg.norm(rhs)
    if fnorm == 0.0:
        return DarcySolution(u, 0, 0.0)
    diag = np.ones((m, m))
    diag[1:-1, 1:-1] = inv_h2 * (ax[1:-1, 1:-1] + ax[:-2, 1:-1] + ay[1:-1, 1:-1] + ay[1:-1, :-2])
    inv_diag = 1.0 / diag
    inv_diag[0, :] = inv_diag[-1, :] = inv_diag[:, 0] = inv_diag[:, -1] = 0.0
    max_iter = max_iter or 20 * m * m
    Ap = np.empty((m, m))

    def apply(x, out):
        return kernels.darcy_apply(x, ax, ay, inv_h2, out)

    it = 0
    while True:
        # restart from the true residual so recursion drift cannot fake convergence
        r = rhs - apply(u, Ap)
        res = np.linalg.norm(r) / fnorm
        if res <= tol:
            return DarcySolution(u, it, float(res))
        if it >= max_iter:
            raise ConvergenceError(f"CG stalled at relative residual {res:.3e} after {it} iterations (m={m})")
        z = r * inv_diag
        p = z.copy()
        rz = float(np.vdot(r, z))
        while it < max_iter:
            it += 1
            apply(p, Ap)
            alpha = rz / float(np.vdot(p, Ap))
            u += alpha * p
            r -= alpha * Ap
            if np.linalg.norm(r) <= 0.5 * tol * fnorm:
                break
            z = r * inv_diag
            rz_new = float(np.vdot(r, z))
            p *= rz_new / rz
            p += z
            rz = rz_new


def darcy_coefficient(g: np.ndarray, variant: str = "lognormal") -> np.ndarray:
    """Map a GRF sample to a positive permeability field."""
    if variant == "lognormal":
        return np.exp(g)
    if variant == "threshold":
        return np.where(g >= 0.0, 12.0, 3.0)
    raise ValueError(f"unknown Darcy coefficient variant {variant!r}")


def darcy_pair(m: int, seed: int, variant: str = "lognormal", f: float = 1.0, tol: float = 1e-10):
    a = darcy_coefficient(grf_sample(GRFSpec(resolution=m, seed=seed)), variant)
    return a, solve_darcy(a, f, tol).u
