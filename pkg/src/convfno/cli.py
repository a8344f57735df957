"""Command-line entry point: ``convfno {gen,train,eval,sweep,ablate-toy,verify}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import verify
from .config import TrainConfig, desk_model_config, load_model_config, load_train_config
from .models import FNO, ConvFNO, build_model
from .pde.dataset import PDES, build_dataset, load_dataset
from .training import evaluate_model, load_checkpoint, train

log = logging.getLogger("convfno")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _kernel_sets(text: str) -> list[tuple[int, ...]]:
    return [tuple(_int_list(part)) for part in text.split(";") if part.strip()]


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args) -> int:
    params = {"dt": args.dt, "T": args.T, "t_start": args.t_start, "kmax": args.kmax}
    if args.pde == "allen-cahn":
        params["eps"] = args.eps
    elif args.pde == "navier-stokes":
        params["nu"] = args.nu
    else:
        params = {"variant": args.variant, "kmax": args.kmax}
        if args.dt is not None or args.T is not None or args.t_start is not None:
            raise SystemExit("--dt/--T/--t-start do not apply to darcy")
    common = dict(resolution=args.resolution, first_pair_only=args.first_pair_only,
                  dtype=args.dtype, paper_faithful=args.paper_faithful)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = build_dataset(args.pde, params, args.series, args.seed, out, split="train",
                          max_pairs=args.max_train_pairs, **common)
    if args.test_series:
        paths += build_dataset(args.pde, params, args.test_series, args.seed, out, split="test",
                               series_offset=args.series, max_pairs=args.max_test_pairs, **common)
    for p in paths:
        print(p)
    return 0


# ---------------------------------------------------------------------------
# train / eval

def cmd_train(args) -> int:
    data = load_dataset(args.data, "train")
    test = load_dataset(args.data, "test") if (Path(args.data) / "test_input.nopd").exists() else None
    if args.model_config:
        mcfg = load_model_config(args.model_config)
        if args.model and mcfg.model != args.model:
            raise SystemExit(f"--model {args.model} disagrees with {args.model_config} (model: {mcfg.model})")
    else:
        mcfg = desk_model_config(args.model or "unet-fno", n_fields=data.inputs.shape[1],
                                 train_res=data.resolution)
    tcfg = load_train_config(args.train_config) if args.train_config else TrainConfig()
    if args.epochs is not None:
        tcfg = TrainConfig(**{**tcfg.__dict__, "epochs": args.epochs})
    ck = train(mcfg, tcfg, data, test, out_dir=args.out,
               callback=lambda h: print(f"epoch {h['epoch']}: train {h['train_loss']:.6g} "
                                        f"test {h['test_rel_l2']:.6g}", flush=True))
    print(f"best epoch {ck.best_epoch}; checkpoint written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.ckpt)
    data = load_dataset(args.data, args.split)
    model = ck.model()
    scheme = args.scheme
    if scheme is not None and not isinstance(model, ConvFNO):
        raise SystemExit("--scheme applies to Conv-FNO checkpoints only")
    if isinstance(model, ConvFNO) and scheme is None and data.resolution != model.train_res:
        scheme = 2
    errs = evaluate_model(model, data.inputs, data.targets, ck.normalizer, scheme=scheme, method=args.resize)
    mean = float(np.nanmean(errs))
    print(f"mean relative L2 over {int(np.isfinite(errs).sum())} samples: {mean:.6g}")
    if args.out:
        _write_rows(args.out, ("index", "rel_l2"), [(i, float(e)) for i, e in enumerate(errs)])
    return 0


def _stem_path(stem: str, res: int) -> Path:
    return Path(stem.format(res=res) if "{res}" in stem else f"{stem}_{res}")


def cmd_sweep(args) -> int:
    ckpts = {}
    for spec in args.ckpt:
        label, _, path = spec.rpartition("=")
        ckpts[label or Path(path).name] = load_checkpoint(path)
    sets = {r: load_dataset(_stem_path(args.data_stem, r), args.split) for r in _int_list(args.resolutions)}
    result = verify.resolution_sweep(ckpts, sets, method=args.resize)
    result.to_csv(args.out)
    for r in result.rows:
        print(f"{r['model']:>16s} scheme {r['scheme']:>6s} m={r['resolution']:<4d} {r['mean_rel_l2']:.6g}")
    return 0


def cmd_ablate(args) -> int:
    train_data = load_dataset(args.data, "train")
    test_data = load_dataset(args.data, "test")
    tcfg = load_train_config(args.train_config) if args.train_config else TrainConfig()
    if args.epochs is not None:
        tcfg = TrainConfig(**{**tcfg.__dict__, "epochs": args.epochs})
    if args.model_config:
        base = load_model_config(args.model_config)
    else:
        base = desk_model_config("fno", n_fields=train_data.inputs.shape[1], train_res=train_data.resolution)
    verify.toy_ablation(_kernel_sets(args.kernel_sets), _int_list(args.channels), train_data, test_data,
                        tcfg, base=base, out_csv=args.out,
                        log=lambda r: print(f"{r['model']} [{r['kernel_set']}] ch={r['channels']}: "
                                            f"{r['test_rel_l2']:.6g}", flush=True))
    return 0


# ---------------------------------------------------------------------------
# verify

def _report(checks, out=None) -> int:
    failed = 0
    rows = []
    for c in checks:
        ok = c.passed
        failed += not ok
        value = c.max_rel_err if isinstance(c, verify.GradCheck) else c.value
        limit = c.tol if isinstance(c, verify.GradCheck) else c.limit
        print(f"{'PASS' if ok else 'FAIL'}  {c.name}: {value:.3e} (limit {limit})")
        rows.append((c.name, float(value), str(limit), "PASS" if ok else "FAIL"))
    if out:
        _write_rows(out, ("check", "value", "limit", "status"), rows)
    return 1 if failed else 0


def cmd_verify(args) -> int:
    what = args.what
    if what == "fft":
        return _report(verify.fft_checks(), args.out)
    if what == "grad":
        return _report(verify.gradient_check_suite(seed=args.seed), args.out)
    if what == "solvers":
        return _report(verify.solver_checks() + [verify.grf_spectrum_check()], args.out)
    if what == "containment":
        if args.ckpt:
            model = load_checkpoint(args.ckpt).model()
            if isinstance(model, ConvFNO):
                raise SystemExit("containment needs a plain FNO checkpoint")
        else:
            model = build_model(desk_model_config("fno"), seed=args.seed)
        rep = verify.check_containment(model, _int_list(args.resolutions))
        checks = [verify.Check(f"containment deviation at m={r}", d, 1e-12) for r, d in rep.deviations.items()]
        checks.append(verify.Check("bit-exact at the training resolution", 0.0 if rep.native_bit_exact else 1.0, 0.0))
        return _report(checks, args.out)
    if what == "bound":
        model = load_checkpoint(args.ckpt).model() if args.ckpt else \
            build_model(desk_model_config("unet-fno"), seed=args.seed)
        if not isinstance(model, FNO):
            raise SystemExit("bound needs a model checkpoint")
        checks, rows = [], []
        for mp in _int_list(args.m_prime):
            rep = verify.check_scheme1_bound(model, mp, n_samples=args.samples, method=args.resize or "bilinear")
            for step, ok in rep.steps.items():
                checks.append(verify.Check(f"m'={mp} {step}: failing samples", float(np.sum(~ok)), 0.0))
            print(f"m'={mp}: L_resize={rep.lip_resize:.4g} L_model={rep.lip_model:.4g} "
                  f"max eps_mm={rep.eps_mm.max():.4g} min bound slack={np.min(rep.bound - rep.eps_mm):.4g}")
            rows += [{"m_prime": mp, **r} for r in rep.rows()]
        if args.samples_out and rows:
            keys = list(rows[0])
            _write_rows(args.samples_out, keys, [[r[k] for k in keys] for r in rows])
        return _report(checks, args.out)
    raise SystemExit(f"unknown verification {what!r}")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convfno", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset directory (train and optional test split)")
    g.add_argument("pde", choices=PDES)
    g.add_argument("--resolution", type=int, default=64)
    g.add_argument("--series", type=int, required=True, help="training series")
    g.add_argument("--test-series", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--eps", type=float)
    g.add_argument("--nu", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--T", type=float, help="final time of each series")
    g.add_argument("--t-start", type=float, help="drop snapshots before this time (a multiple of the interval)")
    g.add_argument("--kmax", type=int, help="band-limit initial conditions to |k_x|,|k_y| <= kmax")
    g.add_argument("--variant", choices=("lognormal", "threshold"), default="lognormal")
    g.add_argument("--paper-faithful", action="store_true", help="NS with dt=1e-4")
    g.add_argument("--first-pair-only", action="store_true")
    g.add_argument("--max-train-pairs", type=int)
    g.add_argument("--max-test-pairs", type=int)
    g.add_argument("--dtype", choices=("f64", "f32"), default="f64")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model; writes a checkpoint directory")
    t.add_argument("--model", choices=("fno", "toy-convfno", "unet-fno"))
    t.add_argument("--model-config")
    t.add_argument("--train-config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, help="override the training config")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="mean relative L2 of a checkpoint on a dataset split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--scheme", type=int, choices=(1, 2))
    e.add_argument("--resize", choices=("bilinear", "fourier"))
    e.add_argument("--out", help="per-sample CSV")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="test error against resolution")
    s.add_argument("--ckpt", action="append", required=True, help="CKPT or LABEL=CKPT; repeatable")
    s.add_argument("--resolutions", default="32,48,64,96,128")
    s.add_argument("--data-stem", required=True, help="dataset dir per resolution: STEM_{res} or a '{res}' pattern")
    s.add_argument("--split", default="test")
    s.add_argument("--resize", choices=("bilinear", "fourier"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("ablate-toy", help="FNO baseline plus toy Conv-FNO per kernel set and channel count")
    a.add_argument("--kernel-sets", default="3,9;3,9,15;3,9,15,27")
    a.add_argument("--channels", default="4,8,16", help="CNN output channels")
    a.add_argument("--data", required=True)
    a.add_argument("--model-config", help="base FNO config; toy runs add the CNN to it")
    a.add_argument("--train-config")
    a.add_argument("--epochs", type=int)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    v = sub.add_parser("verify", help="verification suites; nonzero exit on any failure")
    v.add_argument("what", choices=("fft", "grad", "solvers", "containment", "bound"))
    v.add_argument("--ckpt")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--resolutions", default="32,64,96,128")
    v.add_argument("--m-prime", default="96,48")
    v.add_argument("--samples", type=int, default=32)
    v.add_argument("--resize", choices=("bilinear", "fourier"))
    v.add_argument("--out", help="CSV of check results")
    v.add_argument("--samples-out", help="per-sample CSV for 'bound'")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
