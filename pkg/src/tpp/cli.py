"""Command-line entry point: ``tpp <subcommand> ...``.

Failures print one JSON object ``{"error": ..., "message": ...}`` on stderr
and exit with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND

log = logging.getLogger("tpp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_csv(path, header, rows) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    from .datamodel import write_dataset
    from .simulator import load_config, simulate

    cfg, noise, classes, n_shots, seed = load_config(args.config)
    if args.seed is not None:
        seed = args.seed
    if args.shots is not None:
        n_shots = args.shots
    ds = simulate(cfg, noise, classes, n_shots, seed)
    write_dataset(ds, args.out)
    log.info("wrote %d shots x %d classes to %s", n_shots, len(classes), args.out)
    return 0


def cmd_train(args) -> int:
    from .datamodel import read_dataset, write_model
    from .training import TrainingOptions, train

    method = {"lsq": "numeric-lsq", "closed-form": "closed-form"}[args.method]
    ds = read_dataset(args.data)
    model = train(ds, TrainingOptions(lam=args.lam, method=method))
    write_model(model, args.out)
    return 0


def cmd_eval(args) -> int:
    from .datamodel import read_dataset, read_model
    from .discriminators import classify_argmax, classify_gaussian, fit_gaussian
    from .errors import DimensionMismatch
    from .metrics import fidelity
    from .training import predict

    model = read_model(args.model)
    ds = read_dataset(args.data)
    if tuple(ds.classes) != tuple(model.classes):
        raise DimensionMismatch(f"model classes {list(model.classes)} differ from data classes {list(ds.classes)}")
    X, y = ds.stacked()
    if args.rule == "argmax":
        pred = classify_argmax(model, X)
    else:
        calib = read_dataset(args.calibration) if args.calibration else ds
        C = model.n_classes
        feats = [predict(model, calib.flat(c))[:, : C - 1] for c in range(C)]
        pred = classify_gaussian(fit_gaussian(feats), predict(model, X)[:, : C - 1])
    report = fidelity(y, pred, ds.n_classes, ds.classes).to_dict()
    report["rule"] = args.rule
    _write_json(args.report, report)
    return 0


def cmd_filters(args) -> int:
    from .datamodel import estimate_moments, read_dataset, read_model

    if args.model:
        model = read_model(args.model)
        W, b, names = model.W, model.b, model.classes
    else:
        from .filters import analytic_filters

        ds = read_dataset(args.data)
        bank = analytic_filters(estimate_moments(ds), assume_white=args.assume_white)
        W, b, names = bank.filters, bank.biases, ds.classes
    header = ["class"] + [f"w{i}" for i in range(W.shape[1])] + ["bias"]
    rows = [[names[k], *W[k], b[k]] for k in range(W.shape[0])]
    _write_csv(args.out, header, rows)
    return 0


def cmd_baseline(args) -> int:
    from .datamodel import read_dataset
    from .discriminators import fgda_pipeline
    from .filters import parse_filter_spec
    from .metrics import fidelity
    from .simulator import load_config

    train = read_dataset(args.data)
    held = read_dataset(args.eval) if args.eval else train
    cfg = load_config(args.config)[0] if args.config else None
    filt = parse_filter_spec(args.filter, train, cfg)
    pred = fgda_pipeline(filt, train, held)
    report = fidelity(held.stacked()[1], pred, held.n_classes, held.classes).to_dict()
    report["filter"] = args.filter
    report["in_sample"] = args.eval is None
    _write_json(args.report, report)
    return 0


def cmd_psd(args) -> int:
    from .datamodel import read_dataset
    from .metrics import noise_psd

    ds = read_dataset(args.data)
    freqs, S = noise_psd(ds, ds.index(args.cls), args.obs, method=args.method)
    _write_csv(args.out, ["frequency_hz", "psd"], zip(freqs, S))
    return 0


def cmd_crossval(args) -> int:
    from .datamodel import read_dataset
    from .metrics import cross_validate
    from .simulator import load_config

    ds = read_dataset(args.data)
    cfg = load_config(args.config)[0] if args.config else None
    rep = cross_validate(
        ds, args.pipeline, train_frac=args.train_frac, n_iter=args.iters,
        seed=args.seed, label_flip_prob=args.flip, cfg=cfg,
    )
    _write_json(args.report, rep.to_dict())
    return 0


def cmd_repro(args) -> int:
    from .repro import run_repro

    result = run_repro(args.name, seed=args.seed, n_shots=args.shots, out_dir=args.out_dir)
    for c in result.checks:
        print(c.line())
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'}")
    return 0 if result.passed or not args.strict else 3


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tpp", description="Trainable temporal post-processor for time-series readout.")
    p.add_argument("--version", action="store_true", help="print version and backend, then exit")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a labelled dataset from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    s.add_argument("--shots", type=int, default=None, help="shots per class; overrides the config")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="least-squares TPP training")
    s.add_argument("--data", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.0)
    s.add_argument("--method", choices=("lsq", "closed-form"), default="lsq")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="classify a dataset with a trained model")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--rule", choices=("argmax", "gaussian"), default="argmax")
    s.add_argument("--calibration", default=None, help="dataset for fitting the gaussian rule (default: --data)")
    s.add_argument("--report", default="-")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("filters", help="export model filters, or analytic filters from data")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--model")
    g.add_argument("--data")
    s.add_argument("--assume-white", action="store_true", help="with --data: white-noise filters")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_filters)

    s = sub.add_parser("baseline", help="FGDA with a baseline filter")
    s.add_argument("--data", required=True, help="training dataset")
    s.add_argument("--eval", default=None, help="held-out dataset (default: in-sample)")
    s.add_argument("--filter", required=True, help="matched:a,b | boxcar | ova:p")
    s.add_argument("--config", default=None, help="simulation config (needed for boxcar)")
    s.add_argument("--report", default="-")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("psd", help="noise power spectral density of one class")
    s.add_argument("--data", required=True)
    s.add_argument("--class", dest="cls", required=True)
    s.add_argument("--obs", type=int, default=0)
    s.add_argument("--method", choices=("direct", "fft"), default="direct")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_psd)

    s = sub.add_parser("crossval", help="repeated train/eval splits")
    s.add_argument("--data", required=True)
    s.add_argument("--pipeline", default="tpp", help="tpp | fgda:matched | fgda:boxcar | multi-fgda:p,q")
    s.add_argument("--train-frac", type=float, default=0.8)
    s.add_argument("--iters", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--flip", type=float, default=0.0, help="training label flip probability")
    s.add_argument("--config", default=None, help="simulation config (needed for fgda:boxcar)")
    s.add_argument("--report", default="-")
    s.set_defaults(func=cmd_crossval)

    s = sub.add_parser("repro", help="run a reproduction recipe")
    s.add_argument("name")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--shots", type=int, default=None, help="shots per class for train and eval sets")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    s.set_defaults(func=cmd_repro)
    return p


def _limit_threads(n: int):
    # the jitted kernels are serial; only BLAS/LAPACK pools need capping
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    from .errors import TppError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    if args.version:
        print(f"tpp {__version__} (kernels: {BACKEND}, numpy {np.__version__})")
        return 0
    if not args.command:
        return _fail("UsageError", "a subcommand is required; see tpp --help", 2)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.threads is not None and args.threads < 1:
        return _fail("UsageError", "--threads must be >= 1", 2)
    limiter = _limit_threads(args.threads) if args.threads else None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except TppError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
