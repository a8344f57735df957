"""Verification suites: finite-difference gradients, containment, the
scheme-1 error decomposition, resolution sweeps and the toy ablation."""
from __future__ import annotations

import cmath
import contextlib
import csv
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .config import ModelConfig, ToyCNNConfig, TrainConfig, UNetConfig, desk_model_config
from .models import FNO, ConvFNO, build_model, embed_fno
from .pde.grf import GRFSpec, grf_coefficients, render
from .pde.navier_stokes import solve_ns_vorticity
from .pde.allen_cahn import SolverSpec
from .resize import ResizeOp
from .tensor import Tape, Tensor, as_tensor
from .training import evaluate_model, train

GRAD_TOL = 1e-4


# ---------------------------------------------------------------------------
# finite-difference gradient checks

@dataclass
class GradCheck:
    name: str
    max_rel_err: float
    n_checked: int
    tol: float = GRAD_TOL
    n_kink_skips: int = 0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_err) and self.max_rel_err <= self.tol)


def _rel_err(ad: float, fd: float, floor: float) -> float:
    return abs(ad - fd) / max(abs(ad), abs(fd), floor)


@contextlib.contextmanager
def _branch_log(log: list):
    """Record which side of every ReLU and max-pool branch point the forward takes."""
    relu, pool = ops.relu, ops.max_pool2

    def relu_logged(x):
        log.append(hashlib.sha1(np.packbits(as_tensor(x).data > 0)).digest())
        return relu(x)

    def pool_logged(x):
        d = as_tensor(x).data
        B, C, H, W = d.shape
        win = d.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // 2, W // 2, 4)
        log.append(hashlib.sha1(win.argmax(axis=-1).astype(np.int8).tobytes()).digest())
        return pool(x)

    ops.relu, ops.max_pool2 = relu_logged, pool_logged
    try:
        yield
    finally:
        ops.relu, ops.max_pool2 = relu, pool


def fd_check(name: str, fn, inputs: list, rng: np.random.Generator, n_entries: int = 24,
             step: float = 1e-5, tol: float = GRAD_TOL, max_draws: int | None = None) -> GradCheck:
    """Compare tape gradients of ``sum(fn(*inputs) * R)`` with central differences.

    ``inputs`` are Tensors; those with ``requires_grad`` are probed, each
    entry drawn by picking a tensor uniformly and then an index.  Complex
    entries are perturbed along the real and imaginary axes separately.  The
    relative error uses a floor of 1e-6 times the largest gradient entry of
    the probed tensors, so entries far below that scale are compared in
    absolute terms instead of against round-off.

    A stencil whose ends take a different ReLU / max-pool branch than the
    centre point differences across a kink; the step is shrunk and, if the
    kink is still inside, the entry is replaced by a fresh draw.
    """
    out0 = fn(*inputs)
    R = rng.standard_normal(out0.shape)
    base_log: list = []
    with _branch_log(base_log):
        with Tape() as tape:
            loss = ops.sum(ops.mul(fn(*inputs), R))
    grads = tape.backward(loss)
    probes = [t for t in inputs if t.requires_grad]
    gmax = max(float(np.abs(grads[t]).max()) for t in probes if t in grads)
    floor = 1e-6 * max(gmax, 1e-300)

    def evaluate(t, idx, value):
        t.data[idx] = value
        log: list = []
        with _branch_log(log):
            f = float(np.sum(fn(*inputs).data * R))
        return f, log == base_log

    def central(t, idx, d):
        orig = t.data[idx]
        t.data = t.data.copy()
        try:
            for h in (step, step / 10, step / 100):
                fp, okp = evaluate(t, idx, orig + h * d)
                fm, okm = evaluate(t, idx, orig - h * d)
                if okp and okm:
                    return (fp - fm) / (2 * h)
            return None
        finally:
            t.data[idx] = orig

    worst, checked, skipped = 0.0, 0, 0
    max_draws = max_draws or 4 * n_entries
    draws = 0
    while checked < n_entries and draws < max_draws:
        draws += 1
        t = probes[rng.integers(len(probes))]
        idx = tuple(int(rng.integers(n)) for n in t.shape)
        for d in ((1.0, 1j) if t.is_complex else (1.0,)):
            g = grads[t][idx]
            ad = float(g.real if d == 1.0 else g.imag)
            fd = central(t, idx, d)
            if fd is None:
                skipped += 1
                continue
            worst = max(worst, _rel_err(ad, fd, floor))
        checked += 1
    if checked < n_entries:
        worst = float("inf")
    return GradCheck(name, worst, checked, tol, skipped)


def _t(rng, *shape, scale=1.0, grad=True, complex_=False):
    a = scale * rng.standard_normal(shape)
    if complex_:
        a = a + 1j * scale * rng.standard_normal(shape)
    return Tensor(a, requires_grad=grad)


def layer_checks(rng: np.random.Generator) -> list[GradCheck]:
    from .resize import bilinear_matrix, fourier_matrix
    from .training import relative_l2_loss

    out = []
    x = _t(rng, 2, 3, 8, 8)
    out.append(fd_check("add", lambda a, b: ops.add(a, b), [x, _t(rng, 1, 3, 1, 8)], rng))
    out.append(fd_check("mul", lambda a, b: ops.mul(a, b), [x, _t(rng, 2, 3, 8, 8)], rng))
    out.append(fd_check("matmul", lambda a, b: ops.matmul(a, b), [_t(rng, 4, 5), _t(rng, 5, 3)], rng))
    out.append(fd_check("relu", ops.relu, [x], rng))
    out.append(fd_check("gelu", ops.gelu, [x], rng))
    out.append(fd_check("pointwise_linear", ops.pointwise_linear, [x, _t(rng, 5, 3), _t(rng, 5)], rng))
    out.append(fd_check("conv2d_circular k3", ops.conv2d_circular, [x, _t(rng, 4, 3, 3, 3), _t(rng, 4)], rng))
    out.append(fd_check("conv2d_circular k9 (fft path)", ops.conv2d_circular, [x, _t(rng, 2, 3, 9, 9, scale=0.3)], rng))
    out.append(fd_check("conv2d_circular stride 2",
                        lambda a, w: ops.conv2d_circular(a, w, stride=2), [x, _t(rng, 4, 3, 3, 3)], rng))
    out.append(fd_check("conv_transpose2", ops.conv_transpose2, [x, _t(rng, 3, 4, 2, 2), _t(rng, 4)], rng))
    out.append(fd_check("max_pool2", ops.max_pool2, [x], rng))
    out.append(fd_check("group_norm", lambda a, g, b: ops.group_norm(a, g, b, 2),
                        [_t(rng, 2, 4, 8, 8), _t(rng, 4), _t(rng, 4)], rng))
    out.append(fd_check("concat/slice", lambda a, b: ops.slice_channels(ops.concat_channels(a, b), 1, 5),
                        [x, _t(rng, 2, 2, 8, 8)], rng))
    out.append(fd_check("spectral_conv", lambda a, w: ops.spectral_conv(a, w, (3, 3)),
                        [x, _t(rng, 3, 2, 5, 3, complex_=True)], rng))
    out.append(fd_check("spectral_conv full modes", lambda a, w: ops.spectral_conv(a, w, (5, 5)),
                        [x, _t(rng, 3, 2, 9, 5, complex_=True)], rng))
    out.append(fd_check("resize bilinear 8->12",
                        lambda a: ops.separable_linear(a, bilinear_matrix(8, 12), bilinear_matrix(8, 12)), [x], rng))
    out.append(fd_check("resize fourier 8->6",
                        lambda a: ops.separable_linear(a, fourier_matrix(8, 6), fourier_matrix(8, 6)), [x], rng))
    target = rng.standard_normal((2, 3, 8, 8))
    out.append(fd_check("relative_l2_loss", lambda a: ops.reshape(relative_l2_loss(a, target), (1,)), [x], rng))
    return out


def model_check(kind: str, rng: np.random.Generator, res: int = 32, n_params: int = 64,
                seed: int = 0) -> GradCheck:
    """Full desk-config model; the probed entries are spread over all parameter tensors."""
    cfg = desk_model_config(kind, train_res=res)
    model = build_model(cfg, seed=seed)
    x = rng.standard_normal((2, 1, res, res))
    params = list(model.params.values())
    sub = np.random.default_rng(rng.integers(2 ** 32))
    chosen = [params[i] for i in sub.integers(len(params), size=n_params)]
    frozen = {id(p) for p in params} - {id(p) for p in chosen}
    saved = {id(p): p.requires_grad for p in params}
    for p in params:
        p.requires_grad = id(p) not in frozen
    try:
        probe = [p for p in params if p.requires_grad]
        return fd_check(f"model {kind} ({res}x{res})", lambda *_: model(x), probe, sub, n_entries=n_params)
    finally:
        for p in params:
            p.requires_grad = saved[id(p)]


def gradient_check_suite(seed: int = 0, models: tuple = ("fno", "toy-convfno", "unet-fno")) -> list[GradCheck]:
    rng = np.random.default_rng(seed)
    checks = layer_checks(rng)
    for kind in models:
        checks.append(model_check(kind, rng))
    return checks


# ---------------------------------------------------------------------------
# scalar checks: FFT, spectral layer, solvers, GRF spectrum

@dataclass
class Check:
    name: str
    value: float
    limit: float
    kind: str = "max"  # "max": value <= limit; "range": limit is (lo, hi)

    @property
    def passed(self) -> bool:
        if self.kind == "range":
            lo, hi = self.limit
            return bool(lo <= self.value <= hi)
        return bool(np.isfinite(self.value) and self.value <= self.limit)


def naive_dft2(x: np.ndarray) -> np.ndarray:
    """Per-mode DFT by explicit double sums, half-plane columns only."""
    H, W = x.shape
    out = np.zeros((H, W // 2 + 1), dtype=np.complex128)
    for k in range(H):
        for l in range(W // 2 + 1):
            acc = 0j
            for a in range(H):
                for b in range(W):
                    acc += x[a, b] * cmath.exp(-2j * math.pi * (k * a / H + l * b / W))
            out[k, l] = acc / (H * W)
    return out


def circular_conv_direct(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """y[i, j] = sum_{a, b} k[a, b] x[i - a, j - b] (indices mod H, W), by loops."""
    H, W = x.shape
    y = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            acc = 0.0
            for a in range(H):
                for b in range(W):
                    acc += k[a, b] * x[(i - a) % H, (j - b) % W]
            y[i, j] = acc
    return y


def fft_checks(seed: int = 0) -> list[Check]:
    from .fft import rfft2

    rng = np.random.default_rng(seed)
    out = []
    worst = 0.0
    for shape in ((4, 4), (5, 7), (6, 8), (8, 8), (8, 5)):
        x = rng.standard_normal(shape)
        worst = max(worst, float(np.abs(rfft2(x).coeffs - naive_dft2(x)).max()))
    out.append(Check("rfft2 vs naive DFT", worst, 1e-12))

    # full-mode spectral layer == sum over input channels of direct circular
    # convolutions with kernel irfft2(w_hat) (numpy's 1/(HW) inverse)
    worst = 0.0
    for H, W in ((8, 8), (6, 8), (7, 5)):
        mh, mw = H // 2 + 1, W // 2 + 1
        C, O = 2, 3
        x = rng.standard_normal((1, C, H, W))
        w = rng.standard_normal((C, O, 2 * mh - 1, mw)) + 1j * rng.standard_normal((C, O, 2 * mh - 1, mw))
        rows, wrows = ops.retained_rows(mh, H)
        got = ops.spectral_conv(Tensor(x), Tensor(w), (mh, mw)).data[0]
        ref = np.zeros((O, H, W))
        for i in range(C):
            for o in range(O):
                spec = np.zeros((H, W // 2 + 1), dtype=np.complex128)
                spec[rows, :mw] = w[i, o][wrows]
                kern = np.fft.irfft2(spec, s=(H, W))
                ref[o] += circular_conv_direct(x[0, i], kern)
        worst = max(worst, float(np.abs(got - ref).max()))
    out.append(Check("spectral_conv vs direct circular convolution", worst, 1e-10))
    return out


def taylor_green_check(m: int = 64, nu: float = 1e-3, t: float = 1.0, dt: float = 1e-4) -> Check:
    from .fft import grid

    x = grid(m)
    w0 = 8 * np.pi ** 2 * np.sin(2 * np.pi * x)[:, None] * np.sin(2 * np.pi * x)[None, :]
    w = solve_ns_vorticity(w0, nu, SolverSpec(dt=dt, T=t, interval=t), forcing=None)[-1]
    exact = w0 * np.exp(-8 * np.pi ** 2 * nu * t)
    return Check(f"Taylor-Green decay (m={m}, nu={nu:g}, t={t:g})",
                 float(np.linalg.norm(w - exact) / np.linalg.norm(exact)), 1e-4)


def allen_cahn_energy_check(eps: float, n_runs: int = 20, m: int = 64, seed: int = 0,
                            spec: SolverSpec | None = None) -> Check:
    """Largest per-step energy increase relative to the initial energy, over all runs.

    Every step is checked; a limit of 1e-12 admits summation round-off only.
    """
    from .pde.allen_cahn import solve_allen_cahn

    spec = spec or SolverSpec()
    g = np.stack([render(grf_coefficients(GRFSpec(resolution=m, seed=seed + i)), m) for i in range(n_runs)])
    g /= np.abs(g).max(axis=(1, 2), keepdims=True)
    _, elog = solve_allen_cahn(g, eps, spec, track_energy=True)
    rel = np.asarray(elog.worst_increase) / np.asarray(elog.initial)
    return Check(f"Allen-Cahn energy non-increasing (eps={eps:g}, {n_runs} runs)", float(np.max(rel)), 1e-12)


def darcy_checks(resolutions=(64, 128)) -> list[Check]:
    from .pde.darcy import solve_darcy

    errs, out = [], []
    worst_res = 0.0
    for m in resolutions:
        x = np.linspace(0.0, 1.0, m)
        exact = np.sin(np.pi * x)[:, None] * np.sin(np.pi * x)[None, :]
        sol = solve_darcy(np.ones((m, m)), 2 * np.pi ** 2 * exact)
        errs.append(float(np.linalg.norm(sol.u - exact) / np.linalg.norm(exact)))
        worst_res = max(worst_res, sol.residual)
    out.append(Check(f"Darcy manufactured error at m={resolutions[0]}", errs[0], 5e-3))
    out.append(Check(f"Darcy error ratio m={resolutions[0]}->{resolutions[1]}", errs[0] / errs[1], (3.5, 4.5), "range"))
    out.append(Check("Darcy relative residual", worst_res, 1e-10))
    return out


def solver_checks(n_runs: int = 20, spec: SolverSpec | None = None) -> list[Check]:
    checks = [taylor_green_check()]
    for eps in (0.05, 0.01):
        checks.append(allen_cahn_energy_check(eps, n_runs, spec=spec))
    checks.extend(darcy_checks())
    return checks


def grf_spectrum_check(n_samples: int = 2000, m: int = 64, kmax: int = 4, seed: int = 0) -> Check:
    """Worst relative deviation of the Monte-Carlo mode variance from its eigenvalue, |k| <= kmax."""
    from .pde.grf import eigenvalues

    acc = np.zeros((m, m // 2 + 1))
    for i in range(n_samples):
        acc += np.abs(np.fft.rfft2(render(grf_coefficients(GRFSpec(resolution=m, seed=seed + i)), m)) / m ** 2) ** 2
    var = acc / n_samples
    k = np.fft.fftfreq(m, 1.0 / m)
    kx, ky = np.meshgrid(k, np.arange(m // 2 + 1), indexing="ij")
    sel = kx ** 2 + ky ** 2 <= kmax ** 2
    lam = eigenvalues(kx, ky)
    return Check(f"GRF mode variance vs eigenvalues (|k| <= {kmax}, {n_samples} samples)",
                 float(np.max(np.abs(var[sel] / lam[sel] - 1))), 0.10)


# ---------------------------------------------------------------------------
# containment: an FNO embedded in a zero-CNN Conv-FNO

@dataclass
class ContainmentReport:
    deviations: dict  # resolution -> max |ConvFNO - FNO|
    native_bit_exact: bool

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_deviation <= tol


def check_containment(fno_model: FNO, resolutions=(32, 64, 96, 128), cnn_config=None,
                      n_samples: int = 4, seed: int = 0, method: str | None = None) -> ContainmentReport:
    if cnn_config is None:
        cnn_config = UNetConfig()
    conv = embed_fno(fno_model, cnn_config, seed=seed + 1)
    devs = {}
    native = False
    mh, mw = fno_model.fno_config.modes
    for r in resolutions:
        if mh > r // 2 + 1 or mw > r // 2 + 1:
            raise ValueError(f"resolution {r} cannot resolve the FNO's {(mh, mw)} modes")
        x = np.stack([render(grf_coefficients(GRFSpec(resolution=r, seed=seed + i)), r)
                      for i in range(n_samples)])[:, None]
        ref = fno_model(x).data
        got = conv.eval_scheme2(x, method).data
        devs[r] = float(np.abs(got - ref).max())
        if r == conv.train_res:
            native = bool(np.array_equal(conv(x).data, ref))
    return ContainmentReport(devs, native)


# ---------------------------------------------------------------------------
# scheme-1 error decomposition

@dataclass
class BoundReport:
    m: int
    m_prime: int
    method: str
    Delta: np.ndarray        # output reconstruction error ||i~(C_m) - C_m'||
    delta: np.ndarray        # input reconstruction error ||i(U_m') - U_m||
    eps_m: np.ndarray        # model error at m
    eps_mm: np.ndarray       # cross-resolution error of scheme 1
    lip_resize: float        # probe-set estimate of Lip(i~_{m,m'})
    lip_model: float         # probe-set estimate of Lip(N)
    steps: dict = field(default_factory=dict)  # name -> bool array per sample
    rtol: float = 1e-12

    @property
    def bound(self) -> np.ndarray:
        return self.Delta + self.lip_resize * self.lip_model * self.delta + self.lip_resize * self.eps_m

    def all_hold(self) -> bool:
        return all(bool(np.all(v)) for v in self.steps.values())

    def rows(self) -> list[dict]:
        return [{"sample": i, "Delta": self.Delta[i], "delta": self.delta[i], "eps_m": self.eps_m[i],
                 "eps_mm": self.eps_mm[i], "bound": self.bound[i],
                 **{k: bool(v[i]) for k, v in self.steps.items()}} for i in range(len(self.Delta))]


def _norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))


def _le(a, b, rtol):
    # an inequality between computed numbers, with room for the last bits
    return a <= b * (1 + rtol) + 1e-300


def ns_operator(w0: np.ndarray, nu: float = 1e-3, dt: float = 1e-3, t: float = 0.5) -> np.ndarray:
    """C: w(0) -> w(t) for a batch (B, m, m) with the sinusoidal forcing."""
    return solve_ns_vorticity(w0, nu, SolverSpec(dt=dt, T=t, interval=t))[:, -1]


def check_scheme1_bound(model, m_prime: int, n_samples: int = 32, seed: int = 0,
                        method: str = "bilinear", n_probe: int = 256, kmax: int = 15,
                        nu: float = 1e-3, dt: float = 1e-3, perturb: float = 0.1,
                        rtol: float = 1e-12) -> BoundReport:
    """Measure every quantity of the scheme-1 decomposition on NS samples.

    The model ``N`` runs natively at its training grid m.  Each initial
    vorticity is one band-limited coefficient set rendered at m and m', and
    C is re-solved on each grid.  Lipschitz constants are maxima over a
    probe set that contains the sample pairs the proof uses, so the
    asserted inequalities are valid on that set.
    """
    m = model.config.train_res
    if kmax >= min(m, m_prime) / 2:
        raise ValueError(f"band limit {kmax} must be below both Nyquist indices")
    up = ResizeOp(method, (m, m), (m_prime, m_prime))       # i~_{m,m'}
    down = ResizeOp(method, (m_prime, m_prime), (m, m))     # i_{m',m}
    net = (lambda a: model(a).data)

    coeffs = [grf_coefficients(GRFSpec(resolution=m, seed=seed + i, kmax=kmax)) for i in range(n_samples)]
    U_m = np.stack([render(c, m) for c in coeffs])
    U_mp = np.stack([render(c, m_prime) for c in coeffs])
    C_m = ns_operator(U_m, nu, dt)
    C_mp = C_m if m_prime == m else ns_operator(U_mp, nu, dt)

    iU = down(U_mp[:, None]).data              # i(U_m')
    A = net(iU)                                # N(i(U_m'))
    NU = net(U_m[:, None])                     # N(U_m)
    Cm = C_m[:, None]
    Cmp = C_mp[:, None]
    up_A = up(A).data
    up_C = up(Cm).data

    eps_mm = _norms(up_A - Cmp)
    Delta = _norms(up_C - Cmp)
    delta = _norms(iU - U_m[:, None])
    eps_m = _norms(NU - Cm)

    # probe sets: the proof's own pairs first, then GRF pairs and perturbations
    rng = np.random.default_rng(seed + 10_000)
    extra = max(0, n_probe - n_samples)
    pa = np.stack([render(grf_coefficients(GRFSpec(resolution=m, seed=seed + 20_000 + j)), m)
                   for j in range(extra)])[:, None] if extra else np.zeros((0, 1, m, m))
    pb = pa.copy()
    half = extra // 2
    pb[:half] = pa[:half] + perturb * np.std(pa) * rng.standard_normal(pa[:half].shape)
    if extra - half:
        pb[half:] = np.roll(pa[half:], 1, axis=0)
    diff_resize = np.concatenate([A - Cm, pa - pb])
    num = _norms(up(diff_resize).data)
    den = _norms(diff_resize)
    ok = den > 0
    lip_resize = float(np.max(num[ok] / den[ok]))

    lhs_a = np.concatenate([iU, pa])
    lhs_b = np.concatenate([U_m[:, None], pb])
    out_a = np.concatenate([A, net(pa)]) if extra else A
    out_b = np.concatenate([NU, net(pb)]) if extra else NU
    num = _norms(out_a - out_b)
    den = _norms(lhs_a - lhs_b)
    ok = den > 0
    lip_model = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0

    rep = BoundReport(m, m_prime, method, Delta, delta, eps_m, eps_mm, lip_resize, lip_model, rtol=rtol)
    gap = _norms(up_A - up_C)
    inner = _norms(A - Cm)
    model_gap = _norms(A - NU)
    rep.steps = {
        "triangle_output": _le(eps_mm, gap + Delta, rtol),
        "lipschitz_resize": _le(gap, lip_resize * inner, rtol),
        "triangle_model": _le(inner, model_gap + eps_m, rtol),
        "lipschitz_model": _le(model_gap, lip_model * delta, rtol),
        "composite": _le(eps_mm, rep.bound, rtol),
    }
    return rep


# ---------------------------------------------------------------------------
# resolution sweep

@dataclass
class SweepResult:
    rows: list = field(default_factory=list)  # dicts: model, scheme, resolution, mean_rel_l2, n, train_res

    def curve(self, model: str, scheme: str) -> dict:
        return {r["resolution"]: r["mean_rel_l2"] for r in self.rows if r["model"] == model and r["scheme"] == scheme}

    def flatness(self, model: str, scheme: str) -> float:
        vals = list(self.curve(model, scheme).values())
        return max(vals) / min(vals)

    def to_csv(self, path) -> None:
        cols = ("model", "scheme", "resolution", "train_res", "n", "mean_rel_l2")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in cols])


def resolution_sweep(ckpts: dict, datasets: dict, method: str | None = None, batch_size: int = 16) -> SweepResult:
    """``ckpts``: label -> Checkpoint; ``datasets``: resolution -> Dataset (or (x, y))."""
    res = SweepResult()
    for label, ck in ckpts.items():
        model = ck.model()
        schemes = [None] if isinstance(model, FNO) and not isinstance(model, ConvFNO) else [1, 2]
        m = ck.model_config.train_res
        for r in sorted(datasets):
            data = datasets[r]
            x, y = (data.inputs, data.targets) if hasattr(data, "inputs") else data
            for s in schemes:
                errs = evaluate_model(model, x, y, ck.normalizer, scheme=s, method=method, batch_size=batch_size)
                res.rows.append({"model": label, "scheme": "native" if s is None else str(s),
                                 "resolution": int(r), "train_res": int(r) == m,
                                 "n": int(np.isfinite(errs).sum()), "mean_rel_l2": float(np.nanmean(errs))})
    return res


# ---------------------------------------------------------------------------
# toy ablation

def toy_ablation(kernel_sets, channel_counts, train_data, test_data, train_cfg: TrainConfig,
                 base: ModelConfig | None = None, out_csv=None, log=None) -> list[dict]:
    """Plain FNO baseline plus one toy Conv-FNO per (kernel set, CNN output channels)."""
    base = base or desk_model_config("fno")
    rows = []

    def run(label, cfg, ks, ch):
        ck = train(cfg, train_cfg, train_data, test_data)
        x, y = (test_data.inputs, test_data.targets) if hasattr(test_data, "inputs") else test_data
        err = float(np.nanmean(evaluate_model(ck.model(), x, y, ck.normalizer)))
        rows.append({"model": label, "kernel_set": ks, "channels": ch, "test_rel_l2": err,
                     "best_epoch": ck.best_epoch, "epochs": train_cfg.epochs, "seed": train_cfg.seed})
        if log:
            log(rows[-1])

    fno_cfg = dataclasses.replace(base, model="fno", cnn=None)
    run("fno", fno_cfg, "", 0)
    for ks in kernel_sets:
        for ch in channel_counts:
            cnn = ToyCNNConfig(branch_kernel_sizes=tuple(int(k) for k in ks), out_channels=int(ch))
            cfg = dataclasses.replace(base, model="toy-convfno", cnn=cnn)
            run("toy-convfno", cfg, ",".join(str(k) for k in ks), int(ch))
    if out_csv is not None:
        cols = ("model", "kernel_set", "channels", "test_rel_l2", "best_epoch", "epochs", "seed")
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in cols])
    return rows
