"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 nothing
certified.  ``RISKPRUNE_THREADS`` caps the BLAS thread pools.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import calibration as C
from .io import (
    FormatError,
    export_sparse,
    load_checkpoint,
    read_idx_images,
    read_idx_labels,
    read_scoremaps,
    save_checkpoint,
    write_map_csv,
    write_map_pgm,
    write_report,
)
from .io.idx import pair_samples
from .losses import BINARY_LOSSES
from .network import count_parameters, train_sgd
from .pruning import MagnitudeOrder, average_magnitude_map, propagate_dead_neurons, sparsity
from .pvalues import PVALUES
from .validation import bootstrap_network_risk, parse_curve, simulate_fwer, simulate_superuniformity, superuniformity_margin

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _unit(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return value


def _ratio(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1)")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be a positive integer")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of integers") from None
    if len(values) < 2 or min(values) < 1:
        raise argparse.ArgumentTypeError(f"{text!r} is not a valid architecture")
    return values


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of numbers") from None


def _load_images(args, need_labels: bool):
    X = read_idx_images(args.images)
    y = None
    if getattr(args, "labels", None):
        y = read_idx_labels(args.labels)
        X, y = pair_samples(X, y)
    elif need_labels:
        raise UsageError("--labels is required for this loss")
    split = getattr(args, "split", "all")
    if split != "all":
        if args.n_cal + args.n_val > len(X):
            raise ValueError(f"--n-cal + --n-val exceeds the {len(X)} available images")
        perm = np.random.default_rng(args.split_seed).permutation(len(X))
        idx = perm[:args.n_cal] if split == "cal" else perm[args.n_cal:args.n_cal + args.n_val]
        X = X[idx]
        y = None if y is None else y[idx]
    return X, y


def _add_split(p):
    p.add_argument("--split", choices=("all", "cal", "val"), default="all",
                   help="use the whole file, or the calibration / validation part of a seeded split")
    p.add_argument("--n-cal", type=int, default=9000)
    p.add_argument("--n-val", type=int, default=1000)
    p.add_argument("--split-seed", type=int, default=0)


def _report(result, args):
    if args.report:
        write_report(result, args.report, args.report_format)
        print(f"report written to {args.report}")


def _add_report(p):
    p.add_argument("--report", help="output report path")
    p.add_argument("--report-format", choices=("csv", "json"), default=None,
                   help="defaults to the report file's suffix (csv unless .json)")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    X, y = _load_images(args, need_labels=True)
    if args.arch[0] != X.shape[1]:
        raise ValueError(f"--arch starts with {args.arch[0]} inputs but images have {X.shape[1]} pixels")
    net = train_sgd(args.arch, X, y, args.epochs, args.lr, args.batch, args.seed)
    save_checkpoint(net, args.out, precision=args.precision)
    print(f"parameters: {count_parameters(net)}")
    print(f"train accuracy: {np.mean(net.predict(X) == y):.4f}")
    if args.test_images and args.test_labels:
        Xt, yt = pair_samples(read_idx_images(args.test_images), read_idx_labels(args.test_labels))
        print(f"test accuracy: {np.mean(net.predict(Xt) == yt):.4f}")
    print(f"checkpoint written to {args.out}")
    return EXIT_OK


def cmd_calibrate(args):
    X, y = _load_images(args, need_labels=args.loss != "disagree")
    net = load_checkpoint(args.checkpoint)
    result = C.calibrate_1d(net, X, y, args.alpha, args.delta, args.loss, args.pvalue, args.Q)
    result.config["pvalue_n"] = args.pvalue_n
    result.config["split"] = args.split
    if args.naive:
        result.config["naive_ratio"] = C.naive_ratio(result.grid, result.risks, args.alpha)
    print(result.guarantee())
    _report(result, args)
    if args.naive:
        print(f"naive ratio (first exceedance of alpha, no uncertainty): {result.config['naive_ratio']}")
    if not result.certified:
        print("no pruning certified")
        return EXIT_DEGENERATE
    print(f"certified pruning ratio: {result.selected:g} "
          f"(risk {result.risks[result.rejected[-1]]:.6g}, p-value {result.pvalues[result.rejected[-1]]:.3g})")
    return EXIT_OK


def cmd_selective(args):
    if args.thresholds is None:
        J = args.J or 3
        thresholds = [k / (J + 1) for k in range(1, J + 1)]
    else:
        thresholds = sorted(args.thresholds)
        if args.J is not None and len(thresholds) != args.J:
            raise UsageError(f"--J is {args.J} but {len(thresholds)} thresholds were given")
    if args.T >= args.Q:
        raise UsageError(f"--T must be smaller than --Q (got T={args.T}, Q={args.Q})")
    X, y = _load_images(args, need_labels=True)
    net = load_checkpoint(args.checkpoint)
    result = C.calibrate_selective(net, X, y, thresholds, args.alpha, args.delta, args.T, args.Q,
                                   args.pvalue, args.pvalue_n, args.policy)
    print(result.guarantee())
    print("selective risk interpretation: " + C.SELECTIVE_CONFIDENCE)
    _report(result, args)
    for k, t in enumerate(result.thresholds):
        n_rej = sum(1 for kk, _ in result.rejected if kk == k)
        print(f"threshold {t:g}: {n_rej} ratios certified, abstention "
              f"{result.abstention[k, 0]:.3f} .. {result.abstention[k, -1]:.3f}")
    if not result.certified:
        print("no (threshold, ratio) pair certified")
        return EXIT_DEGENERATE
    t, r = result.selected
    print(f"selected threshold {t:g}, pruning ratio {r:g} (policy {args.policy})")
    return EXIT_OK


def cmd_prune(args):
    net = load_checkpoint(args.checkpoint)
    pruned = MagnitudeOrder(net).prune(args.ratio)
    if args.propagate:
        pruned = propagate_dead_neurons(pruned)
    print(f"ratio {args.ratio:g}: threshold {pruned.mask.threshold:.6g}, sparsity {sparsity(pruned):.6f}")
    if args.out:
        save_checkpoint(pruned.network, args.out, precision=args.precision)
        print(f"checkpoint written to {args.out}")
    if args.sparse_out:
        export_sparse(pruned, args.sparse_out)
        print(f"sparse export written to {args.sparse_out}")
    if args.magnitude_map:
        grid = average_magnitude_map(pruned.network, shape=(args.map_rows, args.map_cols))
        write_map_csv(grid, args.magnitude_map + ".csv")
        write_map_pgm(grid, args.magnitude_map + ".pgm")
        print(f"magnitude map written to {args.magnitude_map}.csv/.pgm")
    return EXIT_OK


def cmd_bootstrap(args):
    X, y = _load_images(args, need_labels=args.loss != "disagree")
    net = load_checkpoint(args.checkpoint)
    report = bootstrap_network_risk(net, args.ratio, X, y, args.loss, args.B, args.seed)
    q = np.quantile(report.risks, [0.05, 0.5, 0.95])
    print(f"point risk {report.point_risk:.6g}; bootstrap mean {report.risks.mean():.6g}, "
          f"5/50/95% quantiles {q[0]:.6g} / {q[1]:.6g} / {q[2]:.6g}")
    if args.naive_alpha is not None:
        report.config["alpha"] = args.naive_alpha
        print(f"bootstrap mass above alpha={args.naive_alpha:g}: {report.mass_above(args.naive_alpha):.4f}")
    _report(report, args)
    return EXIT_OK


class _SuperUniformReport:
    def __init__(self, cdf, config):
        self.cdf = cdf
        self.config = config

    def to_dict(self):
        trials = self.config["trials"]
        return {"kind": "superuniform", "config": self.config,
                "rows": [{"u": u, "cdf": c, "bound": u + superuniformity_margin(u, trials)}
                         for u, c in self.cdf.items()]}


def cmd_simulate(args):
    if args.mode == "superuniform":
        cdf = simulate_superuniformity(args.pvalue, args.n, args.alpha, args.trials, args.seed)
        ok = True
        for u, c in cdf.items():
            bound = u + superuniformity_margin(u, args.trials)
            ok &= c <= bound
            print(f"u={u:g}: P(p <= u) = {c:.5f} (bound {bound:.5f})")
        config = {"pvalue": args.pvalue, "n": args.n, "alpha": args.alpha, "trials": args.trials,
                  "seed": args.seed}
        _report(_SuperUniformReport(cdf, config), args)
        print("super-uniform within Monte Carlo error" if ok else "super-uniformity violated")
        return EXIT_OK
    curve = parse_curve(args.curve)
    grid = np.arange(args.Q) / args.Q
    if args.procedure == "fallback":
        scales = np.asarray(args.row_scales, dtype=np.float64)
        surface = np.clip(scales[:, None] * curve(grid)[None, :], 0.0, 1.0)
        report = simulate_fwer(surface, args.n, args.alpha, args.delta, args.pvalue, "fallback",
                               args.trials, args.seed)
    else:
        report = simulate_fwer(curve, args.n, args.alpha, args.delta, args.pvalue, "fixed-sequence",
                               args.trials, args.seed, grid)
    report.config["curve"] = args.curve
    print(f"violation rate {report.violation_rate:.4f} over {report.trials} trials (delta {args.delta:g})")
    _report(report, args)
    return EXIT_OK


def cmd_segcal(args):
    maps = read_scoremaps(args.scoremaps)
    result = C.calibrate_segmentation(maps.full, maps.pruned, args.beta, args.alpha, args.delta, args.pvalue)
    print(result.guarantee())
    for r, risk, p in zip(result.grid, result.risks, result.pvalues):
        print(f"ratio {r:g}: 1 - IoU = {risk:.6g}, p = {p:.3g}")
    _report(result, args)
    if not result.certified:
        print("no pruning certified")
        return EXIT_DEGENERATE
    print(f"certified pruning ratio: {result.selected:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a dense network with mini-batch SGD")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--arch", type=_int_list, default=[784, 128, 128, 10])
    p.add_argument("--epochs", type=_positive_int, default=10)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=int, choices=(32, 64), default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="certify a pruning ratio with fixed-sequence testing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels")
    p.add_argument("--loss", choices=BINARY_LOSSES, default="misclassify")
    p.add_argument("--alpha", type=_unit, required=True)
    p.add_argument("--delta", type=_unit, default=0.1)
    p.add_argument("--pvalue", choices=PVALUES, default="binomial")
    p.add_argument("--Q", type=_positive_int, default=100)
    p.add_argument("--pvalue-n", choices=C.PVALUE_N_MODES, default="kept")
    p.add_argument("--naive", action="store_true", help="also report the uncertainty-blind ratio")
    _add_split(p)
    _add_report(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("selective", help="certify a (confidence threshold, pruning ratio) pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=_unit, required=True)
    p.add_argument("--delta", type=_unit, default=0.1)
    p.add_argument("--J", type=_positive_int, default=None, help="number of thresholds")
    p.add_argument("--T", type=int, default=80, help="largest tested ratio index")
    p.add_argument("--Q", type=_positive_int, default=100)
    p.add_argument("--thresholds", type=_float_list, default=None)
    p.add_argument("--pvalue", choices=PVALUES, default="binomial")
    p.add_argument("--pvalue-n", choices=C.PVALUE_N_MODES, default="kept")
    p.add_argument("--policy", choices=tuple(C.SELECTION_POLICIES), default="max-sparsity-then-min-abstention")
    _add_split(p)
    _add_report(p)
    p.set_defaults(func=cmd_selective)

    p = sub.add_parser("prune", help="prune a checkpoint at a fixed ratio")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ratio", type=_ratio, required=True)
    p.add_argument("--propagate", action="store_true", help="also remove weights of dead neurons")
    p.add_argument("--out")
    p.add_argument("--precision", type=int, choices=(32, 64), default=32)
    p.add_argument("--sparse-out")
    p.add_argument("--magnitude-map", metavar="PREFIX", help="write PREFIX.csv and PREFIX.pgm")
    p.add_argument("--map-rows", type=_positive_int, default=28)
    p.add_argument("--map-cols", type=_positive_int, default=28)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("bootstrap", help="bootstrap the validation risk at a pruning ratio")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ratio", type=_ratio, required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels")
    p.add_argument("--loss", choices=BINARY_LOSSES, default="disagree")
    p.add_argument("--B", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--naive-alpha", type=_unit, default=None,
                   help="report the share of bootstrap risks above this tolerance")
    _add_split(p)
    _add_report(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="Monte Carlo checks of super-uniformity and FWER control")
    p.add_argument("--mode", choices=("superuniform", "fwer"), required=True)
    p.add_argument("--pvalue", choices=PVALUES, default="binomial")
    p.add_argument("--procedure", choices=("fixed-sequence", "fallback"), default="fixed-sequence")
    p.add_argument("--curve", default="logistic:0.5,0.05,0.0,0.2",
                   help="logistic:center,width,low,high | constant:value | linear:start,stop")
    p.add_argument("--row-scales", type=_float_list, default=[1.0, 0.8, 0.6],
                   help="fallback only: per-row multipliers of the curve")
    p.add_argument("--Q", type=_positive_int, default=100)
    p.add_argument("--n", type=_positive_int, default=500)
    p.add_argument("--alpha", type=_unit, default=0.1)
    p.add_argument("--delta", type=_unit, default=0.1)
    p.add_argument("--trials", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    _add_report(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("segcal", help="certify a pruning ratio from segmentation score maps")
    p.add_argument("--scoremaps", required=True, help="directory of .smap files")
    p.add_argument("--beta", type=_unit, required=True)
    p.add_argument("--alpha", type=_unit, required=True)
    p.add_argument("--delta", type=_unit, default=0.1)
    p.add_argument("--pvalue", choices=("prw", "hb"), default="hb")
    _add_report(p)
    p.set_defaults(func=cmd_segcal)
    return parser


def _thread_limit():
    value = os.environ.get("RISKPRUNE_THREADS")
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(value))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "curve", None) and args.command == "simulate" and args.mode == "fwer":
        try:
            parse_curve(args.curve)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        with _thread_limit():
            return args.func(args)
    except UsageError as exc:
        print(f"riskprune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError, ValueError) as exc:
        print(f"riskprune: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
