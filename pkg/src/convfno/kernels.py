"""Hot loops, each with an ``@njit`` body and a numpy twin.

The public names dispatch on :func:`convfno._accel.numba_enabled`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from ._accel import dispatch, njit

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# GELU

@njit
def _gelu_nb(x):
    out = np.empty_like(x)
    xf = x.ravel()
    of = out.ravel()
    for i in range(xf.size):
        v = xf[i]
        of[i] = 0.5 * v * (1.0 + math.erf(v * _SQRT1_2))
    return out


@njit
def _gelu_slope_nb(x):
    out = np.empty_like(x)
    slope = np.empty_like(x)
    xf = x.ravel()
    of = out.ravel()
    sf = slope.ravel()
    for i in range(xf.size):
        v = xf[i]
        cdf = 0.5 * (1.0 + math.erf(v * _SQRT1_2))
        of[i] = v * cdf
        sf[i] = cdf + v * _INV_SQRT_2PI * math.exp(-0.5 * v * v)
    return out, slope


def _gelu_np(x):
    return 0.5 * x * (1.0 + special.erf(x * _SQRT1_2))


def _gelu_slope_np(x):
    cdf = 0.5 * (1.0 + special.erf(x * _SQRT1_2))
    return x * cdf, cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _contig(f):
    return lambda x: f(np.ascontiguousarray(x))


gelu = dispatch(_contig(_gelu_nb), _gelu_np)
gelu_with_slope = dispatch(_contig(_gelu_slope_nb), _gelu_slope_np)


# ---------------------------------------------------------------------------
# Allen-Cahn forward Euler on a periodic grid

@njit
def _ac_steps_nb(u, nsteps, dt, eps2, h, energy_slack):
    """Advance ``u`` (B, m, m) in place; returns per-sample energy bookkeeping.

    out[b, 0] = energy before the first step, out[b, 1] = energy after the
    last step, out[b, 2] = largest single-step energy increase.
    """
    B, m, n = u.shape
    inv_h2 = 1.0 / (h * h)
    h2 = h * h
    out = np.zeros((B, 3))
    track = energy_slack >= 0.0
    buf = np.empty((m, n))
    for b in range(B):
        cur = u[b]
        nxt = buf
        e_prev = 0.0
        worst = -np.inf
        for s in range(nsteps + (1 if track else 0)):
            e = 0.0
            step = s < nsteps
            for i in range(m):
                ip = i + 1 if i + 1 < m else 0
                im = i - 1 if i > 0 else m - 1
                for j in range(n):
                    jp = j + 1 if j + 1 < n else 0
                    jm = j - 1 if j > 0 else n - 1
                    c = cur[i, j]
                    if track:
                        dx = cur[ip, j] - c
                        dy = cur[i, jp] - c
                        w = 1.0 - c * c
                        e += 0.5 * eps2 * (dx * dx + dy * dy) * inv_h2 + 0.25 * w * w
                    if step:
                        lap = (cur[ip, j] + cur[im, j] + cur[i, jp] + cur[i, jm] - 4.0 * c) * inv_h2
                        nxt[i, j] = c + dt * (c - c * c * c + eps2 * lap)
            if track:
                e *= h2
                if s == 0:
                    out[b, 0] = e
                else:
                    worst = max(worst, e - e_prev)
                e_prev = e
            if step:
                cur, nxt = nxt, cur
        if nsteps % 2 == 1:
            u[b, :, :] = cur
        out[b, 1] = e_prev
        out[b, 2] = worst
    return out


def _ac_energy_np(u, eps2, h):
    dx = np.roll(u, -1, axis=-2) - u
    dy = np.roll(u, -1, axis=-1) - u
    w = 1.0 - u * u
    return (0.5 * eps2 * (dx * dx + dy * dy) / (h * h) + 0.25 * w * w).sum(axis=(-2, -1)) * h * h


def _ac_steps_np(u, nsteps, dt, eps2, h, energy_slack):
    B = u.shape[0]
    out = np.zeros((B, 3))
    track = energy_slack >= 0.0
    worst = np.full(B, -np.inf)
    e_prev = _ac_energy_np(u, eps2, h) if track else None
    if track:
        out[:, 0] = e_prev
    inv_h2 = 1.0 / (h * h)
    for _ in range(nsteps):
        lap = (np.roll(u, 1, -2) + np.roll(u, -1, -2) + np.roll(u, 1, -1) + np.roll(u, -1, -1) - 4.0 * u) * inv_h2
        u += dt * (u - u * u * u + eps2 * lap)
        if track:
            e = _ac_energy_np(u, eps2, h)
            worst = np.maximum(worst, e - e_prev)
            e_prev = e
    if track:
        out[:, 1] = e_prev
        out[:, 2] = worst
    return out


def _ac_steps_nb_call(u, nsteps, dt, eps2, h, energy_slack):
    if not u.flags.c_contiguous:
        raise ValueError("allen-cahn state must be C-contiguous")
    return _ac_steps_nb(u, int(nsteps), float(dt), float(eps2), float(h), float(energy_slack))


allen_cahn_steps = dispatch(_ac_steps_nb_call, _ac_steps_np)
allen_cahn_energy = _ac_energy_np


# ---------------------------------------------------------------------------
# Darcy: -div(a grad u) with harmonic face coefficients, zero Dirichlet ring

@njit
def _darcy_apply_nb(u, ax, ay, inv_h2, out):
    m, n = u.shape
    for i in range(m):
        out[i, 0] = 0.0
        out[i, n - 1] = 0.0
    for j in range(n):
        out[0, j] = 0.0
        out[m - 1, j] = 0.0
    for i in range(1, m - 1):
        for j in range(1, n - 1):
            c = u[i, j]
            out[i, j] = inv_h2 * (
                ax[i, j] * (c - u[i + 1, j])
                + ax[i - 1, j] * (c - u[i - 1, j])
                + ay[i, j] * (c - u[i, j + 1])
                + ay[i, j - 1] * (c - u[i, j - 1])
            )
    return out


def _darcy_apply_np(u, ax, ay, inv_h2, out):
    out[...] = 0.0
    c = u[1:-1, 1:-1]
    out[1:-1, 1:-1] = inv_h2 * (
        ax[1:-1, 1:-1] * (c - u[2:, 1:-1])
        + ax[:-2, 1:-1] * (c - u[:-2, 1:-1])
        + ay[1:-1, 1:-1] * (c - u[1:-1, 2:])
        + ay[1:-1, :-2] * (c - u[1:-1, :-2])
    )
    return out


darcy_apply = dispatch(_darcy_apply_nb, _darcy_apply_np)


# ---------------------------------------------------------------------------
# group normalization over (channels-in-group, H, W)

@njit
def _gn_fwd_nb(x, gamma, beta, groups, eps):
    B, C, H, W = x.shape
    cg = C // groups
    n = cg * H * W
    y = np.empty_like(x)
    mean = np.empty((B, groups))
    inv = np.empty((B, groups))
    for b in range(B):
        for g in range(groups):
            s = 0.0
            for c in range(g * cg, (g + 1) * cg):
                for i in range(H):
                    for j in range(W):
                        s += x[b, c, i, j]
            mu = s / n
            v = 0.0
            for c in range(g * cg, (g + 1) * cg):
                for i in range(H):
                    for j in range(W):
                        d = x[b, c, i, j] - mu
                        v += d * d
            r = 1.0 / math.sqrt(v / n + eps)
            mean[b, g] = mu
            inv[b, g] = r
            for c in range(g * cg, (g + 1) * cg):
                a = gamma[c] * r
                off = beta[c] - mu * a
                for i in range(H):
                    for j in range(W):
                        y[b, c, i, j] = x[b, c, i, j] * a + off
    return y, mean, inv


@njit
def _gn_bwd_nb(x, gout, gamma, mean, inv, groups):
    B, C, H, W = x.shape
    cg = C // groups
    n = cg * H * W
    gx = np.empty_like(x)
    ggamma = np.zeros(C)
    gbeta = np.zeros(C)
    for b in range(B):
        for g in range(groups):
            mu = mean[b, g]
            r = inv[b, g]
            s1 = 0.0
            s2 = 0.0
            for c in range(g * cg, (g + 1) * cg):
                sg = 0.0
                sgx = 0.0
                for i in range(H):
                    for j in range(W):
                        gv = gout[b, c, i, j]
                        xh = (x[b, c, i, j] - mu) * r
                        sg += gv
                        sgx += gv * xh
                ggamma[c] += sgx
                gbeta[c] += sg
                s1 += gamma[c] * sg
                s2 += gamma[c] * sgx
            m1 = s1 / n
            m2 = s2 / n
            for c in range(g * cg, (g + 1) * cg):
                gc = gamma[c]
                for i in range(H):
                    for j in range(W):
                        xh = (x[b, c, i, j] - mu) * r
                        gx[b, c, i, j] = r * (gc * gout[b, c, i, j] - m1 - xh * m2)
    return gx, ggamma, gbeta


def _gn_fwd_np(x, gamma, beta, groups, eps):
    B, C, H, W = x.shape
    xr = x.reshape(B, groups, -1)
    mean = xr.mean(axis=2)
    xc = xr - mean[..., None]
    inv = 1.0 / np.sqrt(np.mean(xc * xc, axis=2) + eps)
    y = (xc * inv[..., None]).reshape(B, C, H, W) * gamma[None, :, None, None] + beta[None, :, None, None]
    return y, mean, inv


def _gn_bwd_np(x, gout, gamma, mean, inv, groups):
    B, C, H, W = x.shape
    xhat = ((x.reshape(B, groups, -1) - mean[..., None]) * inv[..., None]).reshape(B, C, H, W)
    ggamma = np.sum(gout * xhat, axis=(0, 2, 3))
    gbeta = np.sum(gout, axis=(0, 2, 3))
    gh = (gout * gamma[None, :, None, None]).reshape(B, groups, -1)
    xh = xhat.reshape(B, groups, -1)
    gx = inv[..., None] * (gh - gh.mean(axis=2, keepdims=True) - xh * np.mean(gh * xh, axis=2, keepdims=True))
    return gx.reshape(B, C, H, W), ggamma, gbeta


def _gn_fwd_nb_call(x, gamma, beta, groups, eps):
    return _gn_fwd_nb(np.ascontiguousarray(x), gamma, beta, int(groups), float(eps))


def _gn_bwd_nb_call(x, gout, gamma, mean, inv, groups):
    return _gn_bwd_nb(np.ascontiguousarray(x), np.ascontiguousarray(gout), gamma, mean, inv, int(groups))


group_norm_forward = dispatch(_gn_fwd_nb_call, _gn_fwd_np)
group_norm_backward = dispatch(_gn_bwd_nb_call, _gn_bwd_np)

