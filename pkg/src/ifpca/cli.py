"""Command-line front end: cluster, simulate, nulltable, tailcheck."""

import argparse
import csv
import math
import sys

import numpy as np

from . import acm, pipeline, screen
from .errors import (EmptySelection, IfpcaError, InvalidConfig, InvalidK,
                     KTooLarge, NoConvergence, NoEligibleIndex,
                     UnknownExperiment, ZeroSpread, ZeroVarianceColumn)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_EMPTY = 5


def _exit_code(exc):
    if isinstance(exc, (EmptySelection, NoEligibleIndex)):
        return EXIT_EMPTY
    if isinstance(exc, (NoConvergence, ZeroSpread)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ZeroVarianceColumn, InvalidK, KTooLarge)):
        return EXIT_DATA
    if isinstance(exc, (InvalidConfig, UnknownExperiment)):
        return EXIT_USAGE
    if isinstance(exc, (OSError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERICAL


def load_matrix(path, delimiter=",", transpose=False, header="auto"):
    """Read a rectangular numeric matrix from a delimited text file.

    header='auto' skips the first row when it fails to parse as numbers.
    """
    with open(path) as f:
        rows = [line.rstrip("\n") for line in f if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty file")
    start = 0
    if header == "yes":
        start = 1
    elif header == "auto":
        try:
            [float(c) for c in rows[0].split(delimiter)]
        except ValueError:
            start = 1
    data = [[float(c) for c in r.split(delimiter)] for r in rows[start:]]
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows (widths {sorted(widths)})")
    x = np.asarray(data, dtype=np.float64)
    return x.T if transpose else x


def load_labels(path):
    y = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return y


def cmd_cluster(args):
    x = load_matrix(args.input, transpose=args.transpose)
    truth = load_labels(args.labels) if args.labels else None
    null = screen.load_null_table(args.null_table) if args.null_table else None
    opts = pipeline.PipelineOptions(
        k=args.k, method=args.method, norm=args.norm, threshold=args.threshold,
        truncate=args.truncate, null_table=null, null_reps=args.null_reps,
        replicates=args.replicates, seed=args.seed, threads=args.threads,
        hc_fallback=args.hc_fallback, drop_constant=args.drop_constant)
    report = pipeline.run_pipeline(x, opts, truth=truth)
    print(report.to_json())
    if args.out:
        np.savetxt(args.out, report.labels, fmt="%d")
    return EXIT_OK


def _simulate_configs(args):
    if args.config:
        import json
        with open(args.config) as f:
            return [acm.AcmConfig.from_dict(json.load(f))]
    return acm.experiment_preset(args.experiment)


def _setting_tag(cfg):
    parts = [f"K={cfg.k}", f"p={cfg.p}", f"delta={','.join(f'{d:g}' for d in cfg.delta)}",
             f"vartheta={cfg.vartheta:g}", f"r={cfg.r:g}", f"q={cfg.threshold_q:g}",
             f"noise={cfg.noise.kind}"]
    if cfg.noise.kind == "correlated":
        parts.append(f"variant={cfg.noise.variant}({cfg.noise.subset_size})")
    return ";".join(parts)


def simulate_one(cfg, methods, reps, seed, null_cache, null_reps=0, threads=1):
    """Error rates of each method over `reps` generated instances of cfg."""
    n = cfg.n
    errors = {m: [] for m in methods}
    need_null = any(m == "ifpca" for m in methods)
    if need_null and n not in null_cache:
        size = null_reps if null_reps > 0 else screen.default_null_size(cfg.p)
        null_cache[n] = screen.build_null_table(n, size, seed, threads=threads)
    for rep in range(reps):
        x, truth = acm.generate(cfg, seed=[seed, rep])
        for m in methods:
            if m == "ifpca":
                opts = pipeline.PipelineOptions(
                    k=cfg.k, method="ifpca", norm="none", threshold="hc",
                    null_table=null_cache[n], seed=seed, threads=threads)
                rpt = pipeline.run_pipeline(x, opts, truth=truth.y)
            elif m == "ifpca-fixed":
                rpt = pipeline.if_pca_fixed(
                    x, cfg.k, acm.threshold_fixed(cfg.threshold_q, cfg.p),
                    truth=truth.y, norm="none", seed=seed, threads=threads)
            elif m == "pca":
                rpt = pipeline.classical_pca(x, cfg.k, truth=truth.y, norm="none",
                                             seed=seed, threads=threads)
            else:
                rpt = pipeline.baseline(x, cfg.k, m, truth=truth.y, seed=seed,
                                        threads=threads)
            errors[m].append(rpt.error_rate)
    return {m: (float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
            for m, v in errors.items()}


def cmd_simulate(args):
    if args.reps is not None and args.reps < 1:
        print("error: --reps must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    configs = _simulate_configs(args)
    methods = args.methods.split(",")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["experiment", "setting", "method", "mean_error",
                     "sd_error", "reps"])
    null_cache = {}
    exp = args.experiment or "config"
    for cfg in configs:
        reps = args.reps if args.reps is not None else cfg.rep
        stats = simulate_one(cfg, methods, reps, args.seed, null_cache,
                             null_reps=args.null_reps, threads=args.threads)
        for m in methods:
            mean, sd = stats[m]
            writer.writerow([exp, _setting_tag(cfg), m,
                             f"{mean:.6f}", f"{sd:.6f}", reps])
    return EXIT_OK


def cmd_nulltable(args):
    table = screen.build_null_table(args.n, args.reps, args.seed,
                                    threads=args.threads)
    screen.save_null_table(table, args.out)
    return EXIT_OK


def cmd_tailcheck(args):
    grid = [float(t) for t in args.grid.split(",")]
    if not grid or any(t < 0 for t in grid):
        print("error: grid must be nonnegative thresholds", file=sys.stderr)
        return EXIT_USAGE
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.alt:
        # Useful-feature left tail: empirical miss rate vs the Gaussian bound.
        fields = dict(part.split("=") for part in args.alt.split(";"))
        delta = [float(v) for v in fields["delta"].split(",")]
        m = [float(v) for v in fields["m"].split(",")]
        k = len(delta)
        tau_j = float(acm.tau(np.array(m)[:, None], delta, args.n)[0])
        rng = np.random.default_rng(args.seed)
        psis = np.empty(args.reps)
        chunk = max(1, 4_000_000 // args.n)
        done = 0
        while done < args.reps:
            b = min(chunk, args.reps - done)
            labels = rng.choice(k, size=(b, args.n), p=delta)
            z = rng.standard_normal((b, args.n)) + np.take(m, labels)
            psis[done:done + b] = screen._null_psi_batch(z)
            done += b
        writer.writerow(["t", "empirical_miss", "bound"])
        for t in grid:
            miss = float(np.mean(psis <= t))
            bound = k * math.exp(-(tau_j - t) ** 2 / (2 * k * acm.A0 ** 2))
            writer.writerow([f"{t:g}", f"{miss:.8f}", f"{bound:.8g}"])
    else:
        table = screen.build_null_table(args.n, args.reps, args.seed,
                                        threads=args.threads)
        writer.writerow(["t", "empirical_survival", "theory_lower",
                         "theory_upper", "ratio"])
        for t in grid:
            surv = float(np.mean(table.values >= t))
            lower = math.exp(-t ** 2 / (2 * acm.A0 ** 2)) / (math.sqrt(2) * acm.A0)
            ratio = surv / lower if lower > 0 else math.inf
            writer.writerow([f"{t:g}", f"{surv:.8f}", f"{lower:.8g}",
                             f"{2 * lower:.8g}", f"{ratio:.8g}"])
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ifpca",
                                description="KS-screened spectral clustering")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="cluster a samples-by-features matrix")
    c.add_argument("--input", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--labels")
    c.add_argument("--method", default="ifpca", choices=pipeline.METHODS)
    c.add_argument("--norm", default="meanstd",
                   choices=["none", "meanstd", "medmad", "lower50"])
    c.add_argument("--threshold", default="hc")
    c.add_argument("--null-table")
    c.add_argument("--null-reps", type=int, default=0)
    c.add_argument("--replicates", type=int, default=30)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--transpose", action="store_true")
    c.add_argument("--truncate", action="store_true")
    c.add_argument("--hc-fallback", action="store_true")
    c.add_argument("--drop-constant", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("simulate", help="run synthetic-model experiments")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--experiment", choices=["1a", "1b", "2a", "2b", "3", "4", "5"])
    g.add_argument("--config", help="JSON file with a single model config")
    s.add_argument("--reps", type=int, default=None,
                   help="override the preset repetition count")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--methods",
                   default="ifpca,ifpca-fixed,pca,kmeans,kmeanspp,hier")
    s.add_argument("--null-reps", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("nulltable", help="simulate and store a null table")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--reps", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=cmd_nulltable)

    k = sub.add_parser("tailcheck", help="Monte-Carlo check of the score tails")
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--reps", type=int, required=True)
    k.add_argument("--grid", required=True, help="comma-separated thresholds")
    k.add_argument("--alt", help="useful-feature spec 'delta=...;m=...'")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--threads", type=int, default=1)
    k.set_defaults(func=cmd_tailcheck)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except IfpcaError as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
