"""Differentiable primitives.

Every function takes Tensors (constants may be plain arrays or scalars),
computes the forward value with numpy and, when a tape is active, records
a closure returning one gradient per parent.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .tensor import Tensor, as_tensor, record

__all__ = [
    "add", "sub", "mul", "sum", "mean", "matmul", "reshape",
    "relu", "gelu", "pointwise_linear", "conv2d_circular", "conv_transpose2",
    "max_pool2", "group_norm", "concat_channels", "slice_channels",
    "spectral_conv", "separable_linear", "retained_rows",
]

FFT_CONV_MIN_KERNEL = 7


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / reductions

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return record(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return record(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def back(g):
        ga = _unbroadcast(g * np.conj(bd), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * np.conj(ad), bd.shape) if b.requires_grad else None
        return ga, gb

    return record(ad * bd, (a, b), back)


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return record(np.sum(x.data, axis=axis), (x,), back)


def mean(x: Tensor, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis), 1.0 / n)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    ad, bd = a.data, b.data
    return record(ad @ bd, (a, b), lambda g: (g @ np.conj(bd).T, np.conj(ad).T @ g))


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return record(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    x = as_tensor(x)
    if not x.requires_grad:
        return record(kernels.gelu(x.data), (x,), None)
    y, slope = kernels.gelu_with_slope(x.data)
    return record(y, (x,), lambda g: (g * slope,))


# ---------------------------------------------------------------------------
# channel plumbing

def concat_channels(*xs) -> Tensor:
    xs = [as_tensor(x) for x in xs if x is not None]
    xs = [x for x in xs if x.shape[1] > 0]
    if not xs:
        raise ValueError("nothing to concatenate")
    ref = xs[0].shape
    for x in xs[1:]:
        if x.ndim != 4 or x.shape[0] != ref[0] or x.shape[2:] != ref[2:]:
            raise ValueError(f"concat_channels: shape mismatch {ref} vs {x.shape}")
    if len(xs) == 1:
        return xs[0]
    bounds = np.cumsum([0] + [x.shape[1] for x in xs])

    def back(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return record(np.concatenate([x.data for x in xs], axis=1), xs, back)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[:, start:stop] = g
        return (full,)

    return record(x.data[:, start:stop].copy(), (x,), back)


# ---------------------------------------------------------------------------
# dense layers

def pointwise_linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Same affine channel map at every grid point. ``w`` is (C_out, C_in)."""
    x, w = as_tensor(x), as_tensor(w)
    B, C, H, W = x.shape
    if w.ndim != 2 or w.shape[1] != C:
        raise ValueError(f"pointwise_linear: weight {w.shape} incompatible with {C} input channels")
    if b is not None and as_tensor(b).shape != (w.shape[0],):
        raise ValueError("pointwise_linear: bias shape mismatch")
    xf = x.data.reshape(B, C, H * W)
    wd = w.data
    y = np.matmul(wd, xf)
    if b is not None:
        b = as_tensor(b)
        y += b.data[None, :, None]

    def back(g):
        gf = g.reshape(B, -1, H * W)
        gx = np.matmul(wd.T, gf).reshape(B, C, H, W) if x.requires_grad else None
        gw = np.matmul(gf, xf.transpose(0, 2, 1)).sum(axis=0) if w.requires_grad else None
        gb = gf.sum(axis=(0, 2)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return record(y.reshape(B, -1, H, W), parents, back)


def _check_conv(x, w):
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError("conv expects x (B,C,H,W) and w (O,C,kH,kW)")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, kernel expects {w.shape[1]}")


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    B, C, H, W = x.shape
    rh, rw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (rh, kh - 1 - rh), (rw, kw - 1 - rw)), mode="wrap")
    col = np.empty((B, C, kh, kw, H, W), dtype=x.dtype)
    for p in range(kh):
        for q in range(kw):
            col[:, :, p, q] = xp[:, :, p:p + H, q:q + W]
    return col.reshape(B, C * kh * kw, H * W)


def _col2im(gcol: np.ndarray, shape, kh: int, kw: int) -> np.ndarray:
    B, C, H, W = shape
    rh, rw = kh // 2, kw // 2
    gcol = gcol.reshape(B, C, kh, kw, H, W)
    gx = np.zeros(shape)
    for p in range(kh):
        for q in range(kw):
            gx += np.roll(gcol[:, :, p, q], (p - rh, q - rw), axis=(2, 3))
    return gx


def _kernel_image(w: np.ndarray, H: int, W: int) -> np.ndarray:
    O, C, kh, kw = w.shape
    rh, rw = kh // 2, kw // 2
    img = np.zeros((O, C, H, W))
    rows = (np.arange(kh) - rh) % H
    cols = (np.arange(kw) - rw) % W
    np.add.at(img, (slice(None), slice(None), rows[:, None], cols[None, :]), w)
    return img


def _conv_im2col(x, w, b):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    xd, wd = x.data, w.data
    col = _im2col(xd, kh, kw)
    wm = wd.reshape(O, -1)
    y = np.matmul(wm, col).reshape(B, O, H, W)
    if b is not None:
        y += b.data[None, :, None, None]

    def back(g):
        gf = g.reshape(B, O, H * W)
        gx = gw = None
        if x.requires_grad:
            gx = _col2im(np.matmul(wm.T, gf), xd.shape, kh, kw)
        if w.requires_grad:
            c = _im2col(xd, kh, kw)
            gw = np.matmul(gf, c.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
        gb = gf.sum(axis=(0, 2)) if b is not None else None
        return gx, gw, gb

    return y, back


def _conv_fft(x, w, b):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    xd, wd = x.data, w.data
    X = np.fft.rfft2(xd)
    K = np.fft.rfft2(_kernel_image(wd, H, W))
    # correlation: y_hat[b,o] = sum_c conj(K[o,c]) X[b,c]
    Y = np.einsum("ocxy,bcxy->boxy", np.conj(K), X, optimize=True)
    y = np.fft.irfft2(Y, s=(H, W))
    if b is not None:
        y += b.data[None, :, None, None]

    def back(g):
        G = np.fft.rfft2(g)
        gx = gw = None
        if x.requires_grad:
            gx = np.fft.irfft2(np.einsum("ocxy,boxy->bcxy", K, G, optimize=True), s=(H, W))
        if w.requires_grad:
            gimg = np.fft.irfft2(np.einsum("boxy,bcxy->ocxy", np.conj(G), X, optimize=True), s=(H, W))
            rows = (np.arange(kh) - kh // 2) % H
            cols = (np.arange(kw) - kw // 2) % W
            gw = gimg[:, :, rows[:, None], cols[None, :]]
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    return y, back


def conv2d_circular(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1) -> Tensor:
    """Cross-correlation with periodic wrap-around padding ('same' size).

    ``w`` is (C_out, C_in, kH, kW). Small kernels go through im2col + GEMM,
    large ones through the FFT; both compute the same map.
    """
    x, w = as_tensor(x), as_tensor(w)
    _check_conv(x, w)
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    B, C, H, W = x.shape
    if H % stride or W % stride:
        raise ValueError(f"stride {stride} does not divide extent {(H, W)}")
    if b is not None:
        b = as_tensor(b)
    kh, kw = w.shape[2:]
    impl = _conv_fft if max(kh, kw) >= FFT_CONV_MIN_KERNEL else _conv_im2col
    y, back = impl(x, w, b)
    parents = (x, w) if b is None else (x, w, b)
    if stride == 1:
        return record(y, parents, back)

    def back_strided(g):
        full = np.zeros((B, w.shape[0], H, W))
        full[:, :, ::stride, ::stride] = g
        return back(full)

    return record(np.ascontiguousarray(y[:, :, ::stride, ::stride]), parents, back_strided)


def conv_transpose2(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """2x2 stride-2 transposed convolution; ``w`` is (C_in, C_out, 2, 2)."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 4 or w.shape[2:] != (2, 2) or w.shape[0] != x.shape[1]:
        raise ValueError(f"conv_transpose2: weight {w.shape} incompatible with input {x.shape}")
    B, C, H, W = x.shape
    O = w.shape[1]
    xd, wd = x.data, w.data
    # y[b,o,2i+p,2j+q] = sum_c x[b,c,i,j] w[c,o,p,q]
    t = np.matmul(wd.reshape(C, O * 4).T, xd.reshape(B, C, H * W))  # (B, O*4, HW)
    y = t.reshape(B, O, 2, 2, H, W).transpose(0, 1, 4, 2, 5, 3).reshape(B, O, 2 * H, 2 * W)
    if b is not None:
        b = as_tensor(b)
        y = y + b.data[None, :, None, None]

    def back(g):
        gt = g.reshape(B, O, H, 2, W, 2).transpose(0, 1, 3, 5, 2, 4).reshape(B, O * 4, H * W)
        gx = np.matmul(wd.reshape(C, O * 4), gt).reshape(B, C, H, W) if x.requires_grad else None
        gw = None
        if w.requires_grad:
            gw = np.matmul(xd.reshape(B, C, H * W), gt.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return record(np.ascontiguousarray(y), parents, back)


def max_pool2(x: Tensor) -> Tensor:
    x = as_tensor(x)
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ValueError(f"max_pool2 needs even extents, got {(H, W)}")
    win = x.data.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // 2, W // 2, 4)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def back(g):
        gw = np.zeros((B, C, H // 2, W // 2, 4))
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        gx = gw.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H, W)
        return (gx,)

    return record(y, (x,), back)


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, num_groups: int, eps: float = 1e-5) -> Tensor:
    """Normalize each (sample, channel group) to zero mean / unit variance, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    B, C, H, W = x.shape
    if C % num_groups:
        raise ValueError(f"{C} channels not divisible by {num_groups} groups")
    xd = x.data
    y, mu, inv = kernels.group_norm_forward(xd, gamma.data, beta.data, num_groups, eps)

    def back(g):
        gx, ggamma, gbeta = kernels.group_norm_backward(xd, g, gamma.data, mu, inv, num_groups)
        return gx, ggamma, gbeta

    return record(y, (x, gamma, beta), back)


# ---------------------------------------------------------------------------
# spectral convolution

def retained_rows(modes_h: int, H: int) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum rows kept by a spectral layer and the weight rows feeding them.

    Weight rows are stored in FFT order ``[0..mh-1, -(mh-1)..-1]``. When the
    two halves meet at the Nyquist row the duplicate negative entry is
    dropped so every spectrum row is written once.
    """
    pos = np.arange(modes_h)
    neg = H - np.arange(modes_h - 1, 0, -1)
    wneg = np.arange(modes_h, 2 * modes_h - 1)
    keep = ~np.isin(neg % H, pos)
    return np.concatenate([pos, neg[keep] % H]), np.concatenate([pos, wneg[keep]])


def _column_weights(W: int, ncols: int) -> np.ndarray:
    """Multiplicity of each stored half-plane column in the real inverse FFT."""
    c = np.full(ncols, 2.0)
    c[0] = 1.0
    if W % 2 == 0 and ncols == W // 2 + 1:
        c[-1] = 1.0
    return c


def spectral_conv(x: Tensor, w: Tensor, modes: tuple[int, int]) -> Tensor:
    """FFT -> per-mode complex channel contraction on retained modes -> inverse FFT.

    ``w`` is complex (C_in, C_out, 2*modes_h-1, modes_w). Coefficients use the
    per-mode convention (forward transform divided by H*W), so the same
    weights act identically on any grid that resolves the retained modes.
    """
    x, w = as_tensor(x), as_tensor(w)
    mh, mw = modes
    B, C, H, W = x.shape
    if w.shape != (C, w.shape[1], 2 * mh - 1, mw):
        raise ValueError(f"spectral weights {w.shape} do not match input channels {C} / modes {modes}")
    if mh > H // 2 + 1 or mw > W // 2 + 1:
        raise ValueError(f"modes {modes} exceed the Nyquist limit of a {H}x{W} grid")
    O = w.shape[1]
    rows, wrows = retained_rows(mh, H)
    hw = float(H * W)
    X = np.fft.rfft2(x.data) / hw
    # (R, mw, B, C) @ (R, mw, C, O) -> (R, mw, B, O)
    Xr = X[:, :, rows, :mw].transpose(2, 3, 0, 1)
    Wr = w.data[:, :, wrows, :].transpose(2, 3, 0, 1)
    Yr = np.matmul(Xr, Wr)
    Y = np.zeros((B, O, H, W // 2 + 1), dtype=np.complex128)
    Y[:, :, rows, :mw] = Yr.transpose(2, 3, 0, 1)
    y = np.fft.irfft2(Y, s=(H, W)) * hw

    def back(g):
        c = _column_weights(W, W // 2 + 1)
        GY = np.fft.rfft2(g) * c
        GYr = GY[:, :, rows, :mw].transpose(2, 3, 0, 1)  # (R, mw, B, O)
        gx = gw = None
        if w.requires_grad:
            gsel = np.matmul(np.conj(Xr).transpose(0, 1, 3, 2), GYr)  # (R, mw, C, O)
            gw = np.zeros(w.shape, dtype=np.complex128)
            gw[:, :, wrows, :] = gsel.transpose(2, 3, 0, 1)
        if x.requires_grad:
            GXr = np.matmul(GYr, np.conj(Wr).transpose(0, 1, 3, 2))  # (R, mw, B, C)
            GX = np.zeros((B, C, H, W // 2 + 1), dtype=np.complex128)
            GX[:, :, rows, :mw] = GXr.transpose(2, 3, 0, 1)
            gx = np.fft.irfft2(GX / c, s=(H, W))
        return gx, gw

    return record(y, (x, w), back)


# ---------------------------------------------------------------------------
# linear resampling

def separable_linear(x: Tensor, mh: np.ndarray, mw: np.ndarray) -> Tensor:
    """``y[b,c] = mh @ x[b,c] @ mw.T`` for fixed (non-trainable) matrices."""
    x = as_tensor(x)
    y = np.matmul(np.matmul(mh, x.data), mw.T)
    return record(y, (x,), lambda g: (np.matmul(np.matmul(mh.T, g), mw),))
