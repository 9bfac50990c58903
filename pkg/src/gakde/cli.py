"""
Command-line entry point: ``gakde simulate | fit | grid | baseline``.

Every subcommand writes into ``--out`` and the files depend only on the input
bytes, flags and seed. Exit codes: 0 success, 1 I/O or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .density import DataSet, SparseKde
from .errors import DataError, GakdeError, InvalidArgumentError, UnsupportedDimensionError
from .fitness import CV_VARIANTS, BandwidthSearchConfig
from .ga import MUTATION_SOURCES, GaConfig, GaResult, make_rng, run
from .io import SCHEMA_VERSION, read_csv, read_support, write_json, write_rows, write_support
from .metrics import condensation_stats, incumbent_ise_trace, ise_star, lscv_baseline, mise
from .mixtures import BUILTIN_MIXTURES, builtin_mixture, ise_exact, mixture_sample, trapezoid_grid

log = logging.getLogger("gakde")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

FULL_TABLE_N = (200, 400, 1000)
FULL_TABLE_B = (2, 5, 25, 50, 100, 150)
TABLE_GENERATIONS = (1, 25, 50, 75, 100)


class UsageError(Exception):
    pass


def derive_seeds(seed: int, count: int) -> List[int]:
    """``count`` independent 64-bit seeds derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


# -- parsers -----------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=_u64, default=0, help="master seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1, help="fitness-evaluation worker threads")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--timing", action="store_true", help="include wall time in report.json (breaks byte-identity)")
    p.add_argument("-v", "--verbose", action="store_true")


def _bandwidth_flags(p: argparse.ArgumentParser):
    d = BandwidthSearchConfig()
    p.add_argument("--h-lo", type=float, default=d.h_lo_factor, help="lower bracket factor on the reference bandwidth")
    p.add_argument("--h-hi", type=float, default=d.h_hi_factor, help="upper bracket factor on the reference bandwidth")
    p.add_argument("--rel-tol", type=float, default=d.rel_tol)
    p.add_argument("--max-iters", type=int, default=d.max_iters)


def _ga_flags(p: argparse.ArgumentParser):
    d = GaConfig()
    p.add_argument("--b", type=int, default=d.b, help="subsample (chromosome) size")
    p.add_argument("--B", type=int, default=d.B, help="population size (even)")
    p.add_argument("--G", type=int, default=d.G, help="final generation")
    p.add_argument("--pu", type=float, default=d.p_u, help="crossover probability")
    p.add_argument("--pm", type=float, default=d.p_m, help="mutation probability")
    p.add_argument("--pe", type=float, default=d.p_e, help="elite fraction")
    p.add_argument("--mutation-source", choices=MUTATION_SOURCES, default=d.mutation_source)
    p.add_argument("--cv-variant", choices=CV_VARIANTS, default=d.cv_variant)
    _bandwidth_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gakde", description="Sparse kernel density estimation by genetic algorithm.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo run against a built-in Gaussian mixture")
    p.add_argument("--mixture", choices=BUILTIN_MIXTURES, required=True)
    p.add_argument("--n", type=int, default=1000, help="sample size N")
    p.add_argument("--t", type=int, default=10, help="GA repetitions on the same dataset")
    p.add_argument("--datasets", type=int, default=0, help="also compute MISE over this many fresh datasets")
    p.add_argument("--full-tables", action="store_true", help="sweep N in (200, 400, 1000) x b in (2..150); slow")
    _ga_flags(p)
    _common(p)

    p = sub.add_parser("fit", help="fit a sparse KDE to numeric columns of a CSV file")
    p.add_argument("csv", type=Path)
    p.add_argument("--columns", help="comma-separated header names or 0-based indices")
    p.add_argument("--where", metavar="COL=VALUE", help="keep only rows whose COL equals VALUE")
    _ga_flags(p)
    _common(p)

    p = sub.add_parser("grid", help="evaluate a saved sparse KDE on a regular grid")
    p.add_argument("source", type=Path, help="report.json, or support.csv (needs --h or a sibling report.json)")
    p.add_argument("--h", type=float, help="bandwidth when reading a bare support.csv")
    p.add_argument("--bounds", nargs=2, type=float, action="append", metavar=("LO", "HI"),
                   help="axis bounds; give once for all axes or once per axis (default: support +/- 4h)")
    p.add_argument("--resolution", type=int, default=101, help="nodes per axis")
    _common(p)

    p = sub.add_parser("baseline", help="full-sample LSCV scalar-bandwidth KDE")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", type=Path)
    src.add_argument("--mixture", choices=BUILTIN_MIXTURES)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--columns")
    p.add_argument("--where", metavar="COL=VALUE")
    _bandwidth_flags(p)
    _common(p)
    return parser


# -- shared helpers ----------------------------------------------------------


def _bw_cfg(args) -> BandwidthSearchConfig:
    return BandwidthSearchConfig(args.h_lo, args.h_hi, args.rel_tol, args.max_iters)


def _ga_cfg(args, seed: int) -> GaConfig:
    return GaConfig(
        b=args.b, B=args.B, G=args.G, p_u=args.pu, p_m=args.pm, p_e=args.pe,
        mutation_source=args.mutation_source, bw_cfg=_bw_cfg(args), cv_variant=args.cv_variant,
        seed=seed, threads=args.threads,
    )


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        # output location and worker count never change results
        if k in ("verbose", "out", "threads", "timing"):
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _ga_echo(cfg: GaConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["n_elite"] = cfg.n_elite
    d.pop("seed")
    d.pop("threads")  # no effect on results
    return d


def _stats_dict(stats) -> dict:
    return {
        "distinct_count": stats.distinct_count,
        "max_multiplicity": stats.max_multiplicity,
        "dcr": stats.dcr,
        "multiplicity_histogram": {str(k): v for k, v in stats.multiplicity_histogram.items()},
    }


def _support_dict(kde: SparseKde) -> list:
    return [
        {"index": int(i), "coords": [float(x) for x in p], "gamma": float(g)}
        for i, p, g in zip(kde.support, kde.points, kde.gamma)
    ]


def _frequencies_by_distance(kde: SparseKde, result: GaResult) -> list:
    """Support rows ranked by distance from the origin, with their gene counts."""
    counts = dict(zip(*np.unique(result.best.genes, return_counts=True)))
    order = np.argsort(np.linalg.norm(kde.points, axis=1), kind="stable")
    return [
        {"rank": r + 1, "index": int(kde.support[i]), "distance": float(np.linalg.norm(kde.points[i])),
         "multiplicity": int(counts[kde.support[i]])}
        for r, i in enumerate(order)
    ]


def _write_trace(path: Path, result: GaResult, ise_trace: Optional[Sequence[float]]):
    rows = []
    for i, rec in enumerate(result.trace):
        ise = float(ise_trace[i]) if ise_trace is not None else ""
        rows.append([rec.generation, float(rec.best_criterion), float(rec.best_h), ise])
    write_rows(path, ["generation", "best_criterion", "best_h", "ise_of_incumbent"], rows)


def _trace_dicts(result: GaResult) -> list:
    return [
        {"generation": r.generation, "best_criterion": float(r.best_criterion), "best_h": float(r.best_h),
         "distinct_count": r.distinct_count}
        for r in result.trace
    ]


def _finish(report: dict, args, started: float):
    elapsed = time.perf_counter() - started
    if args.timing:
        report["wall_time_seconds"] = elapsed
    write_json(args.out / "report.json", report)
    log.info("wrote %s (%.1f s)", args.out / "report.json", elapsed)


def _parse_where(text: Optional[str]):
    if text is None:
        return None
    if "=" not in text:
        raise UsageError("--where expects COL=VALUE")
    col, value = text.split("=", 1)
    return col, value


def _columns(text: Optional[str]):
    return [c for c in text.split(",")] if text else None


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> dict:
    started = time.perf_counter()
    if args.n < 2 or args.t < 1 or args.datasets < 0:
        raise UsageError("need --n >= 2, --t >= 1, --datasets >= 0")
    if args.full_tables:
        return _full_tables(args, started)
    truth = builtin_mixture(args.mixture)
    data_seed, *run_seeds = derive_seeds(args.seed, 1 + args.t)
    cfg = _ga_cfg(args, run_seeds[0])
    data = mixture_sample(truth, args.n, make_rng(data_seed))
    summary = ise_star(data, truth, cfg, t=args.t, seeds=run_seeds)

    # the run with the lowest final criterion stands for the fitted estimator
    pick = min(range(args.t), key=lambda i: (summary.results[i].best.criterion, i))
    res = summary.results[pick]
    stats = summary.stats[pick]
    pick_trace = incumbent_ise_trace(res, data, truth, cfg.weights)
    _write_trace(args.out / "trace.csv", res, pick_trace)
    write_support(args.out / "support.csv", res.kde)

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": _config_echo(args),
        "ga": _ga_echo(cfg),
        "seed": args.seed,
        "data_seed": data_seed,
        "run_seeds": run_seeds,
        "data": {"source": f"mixture:{args.mixture}", "n": data.size, "dim": data.dim},
        "ise_star": summary.ise_star,
        "ise_star_sd": summary.ise_star_sd,
        "ise_star_sd_defined": summary.sd_defined,
        "ise_per_run": summary.ise_per_run,
        "ise_star_trace": summary.ise_trace,
        "runs": [
            {"seed": s, "best_criterion": r.best.criterion, "h_star": r.best.h_star, "ise": ise,
             "evaluations": r.evaluations, "condensation": _stats_dict(st)}
            for s, r, ise, st in zip(run_seeds, summary.results, summary.ise_per_run, summary.stats)
        ],
        "condensation_mean": {
            "distinct_count": summary.mean_distinct,
            "max_multiplicity": summary.mean_max_multiplicity,
            "dcr": summary.mean_dcr,
        },
        "selected_run": pick,
        "best_criterion": res.best.criterion,
        "h_star": res.best.h_star,
        "ise": summary.ise_per_run[pick],
        "condensation": _stats_dict(stats),
        "support": _support_dict(res.kde),
        "trace": _trace_dicts(res),
    }
    if args.datasets:
        ms = mise(truth, cfg, s=args.datasets, n=args.n, seeds=derive_seeds(args.seed ^ 0x5EED, args.datasets))
        report["mise"] = {"datasets": args.datasets, "mise": ms.mise, "sd": ms.sd,
                          "ise_per_dataset": ms.ise_per_dataset, "dcr_per_dataset": ms.dcr}
    _finish(report, args, started)
    return report


def _full_tables(args, started: float) -> dict:
    truth = builtin_mixture(args.mixture)
    rows, cells = [], []
    for n in FULL_TABLE_N:
        data_seed, *run_seeds = derive_seeds(args.seed + n, 1 + args.t)
        data = mixture_sample(truth, n, make_rng(data_seed))
        for b in FULL_TABLE_B:
            cfg = dataclasses.replace(_ga_cfg(args, run_seeds[0]), b=b)
            log.info("table cell N=%d b=%d", n, b)
            s = ise_star(data, truth, cfg, t=args.t, seeds=run_seeds)
            at = [s.ise_trace[min(g, len(s.ise_trace)) - 1] for g in TABLE_GENERATIONS]
            rows.append([n, b, *[float(v) for v in at], s.ise_star_sd,
                         s.mean_distinct, s.mean_max_multiplicity, s.mean_dcr])
            cells.append({"n": n, "b": b, "ise_star_at": dict(zip(map(str, TABLE_GENERATIONS), at)),
                          "ise_star_sd": s.ise_star_sd, "distinct": s.mean_distinct,
                          "max_multiplicity": s.mean_max_multiplicity, "dcr": s.mean_dcr})
    write_rows(args.out / "tables.csv",
               ["n", "b", *[f"ise_star_g{g}" for g in TABLE_GENERATIONS], "ise_star_sd",
                "distinct", "max_multiplicity", "dcr"], rows)
    report = {"schema_version": SCHEMA_VERSION, "command": "simulate --full-tables",
              "config": _config_echo(args), "cells": cells}
    _finish(report, args, started)
    return report


def _load_csv(args):
    try:
        return read_csv(args.csv, _columns(args.columns), _parse_where(args.where))
    except FileNotFoundError as exc:
        raise OSError(f"cannot read {args.csv}: {exc.strerror}") from exc


def cmd_fit(args) -> dict:
    started = time.perf_counter()
    cfg = _ga_cfg(args, args.seed)
    data, names = _load_csv(args)
    res = run(data, cfg)
    stats = condensation_stats(res.kde, res.best, data.size)
    _write_trace(args.out / "trace.csv", res, None)
    write_support(args.out / "support.csv", res.kde, names)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": _config_echo(args),
        "ga": _ga_echo(cfg),
        "seed": args.seed,
        "data": {"source": str(args.csv), "n": data.size, "dim": data.dim, "columns": names},
        "best_criterion": res.best.criterion,
        "h_star": res.best.h_star,
        "evaluations": res.evaluations,
        "condensation": _stats_dict(stats),
        "support": _support_dict(res.kde),
        "support_by_distance": _frequencies_by_distance(res.kde, res),
        "trace": _trace_dicts(res),
    }
    _finish(report, args, started)
    return report


def cmd_baseline(args) -> dict:
    started = time.perf_counter()
    truth = None
    bw = _bw_cfg(args)
    if args.csv is not None:
        data, names = _load_csv(args)
        source = str(args.csv)
    else:
        if args.columns or args.where:
            raise UsageError("--columns/--where only apply with --csv")
        if args.n < 2:
            raise UsageError("--n must be >= 2")
        truth = builtin_mixture(args.mixture)
        data_seed = derive_seeds(args.seed, 1)[0]
        data = mixture_sample(truth, args.n, make_rng(data_seed))
        names, source = None, f"mixture:{args.mixture}"
    h, kde = lscv_baseline(data, bw)
    write_support(args.out / "support.csv", kde, names)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "baseline",
        "config": _config_echo(args),
        "strategy": "lscv-full-sample",
        "seed": args.seed,
        "data": {"source": source, "n": data.size, "dim": data.dim},
        "h_star": h,
        "condensation": {"distinct_count": kde.size, "max_multiplicity": 1, "dcr": kde.size / data.size},
    }
    if truth is not None:
        report["data_seed"] = data_seed
        report["ise"] = ise_exact(kde, data, truth)
    _finish(report, args, started)
    return report


def _load_estimator(args) -> SparseKde:
    src: Path = args.source
    if src.suffix == ".json":
        with open(src, encoding="utf-8") as fh:
            rep = json.load(fh)
        if "support" not in rep or "h_star" not in rep:
            raise DataError(f"{src}: report has no support/h_star")
        idx = np.array([s["index"] for s in rep["support"]], dtype=np.int64)
        pts = np.array([s["coords"] for s in rep["support"]], dtype=float)
        gamma = np.array([s["gamma"] for s in rep["support"]], dtype=float)
        h = float(rep["h_star"])
    else:
        idx, pts, gamma, _ = read_support(src)
        h = args.h
        if h is None:
            sibling = src.with_name("report.json")
            if not sibling.exists():
                raise UsageError("bare support file needs --h or a sibling report.json")
            with open(sibling, encoding="utf-8") as fh:
                h = float(json.load(fh)["h_star"])
    return SparseKde(support=idx, gamma=gamma, h_star=h, dim=pts.shape[1], points=pts)


def grid_nodes(kde: SparseKde, bounds, resolution: int):
    d = kde.dim
    if d > 3:
        raise UnsupportedDimensionError("grid export supports d <= 3")
    if resolution < 2:
        raise UsageError("--resolution must be >= 2")
    if not bounds:
        lo = kde.points.min(axis=0) - 4 * kde.h_star
        hi = kde.points.max(axis=0) + 4 * kde.h_star
    elif len(bounds) == 1:
        lo, hi = np.full(d, bounds[0][0]), np.full(d, bounds[0][1])
    elif len(bounds) == d:
        lo, hi = np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])
    else:
        raise UsageError(f"give --bounds once or {d} times")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise UsageError("degenerate bounds: need finite LO < HI on every axis")
    nodes, weights = trapezoid_grid(lo, hi, resolution)
    return nodes, weights


def cmd_grid(args) -> dict:
    kde = _load_estimator(args)
    nodes, _ = grid_nodes(kde, args.bounds, args.resolution)
    dens = kde(nodes)
    names = [f"x{j + 1}" for j in range(kde.dim)]
    write_rows(args.out / "grid.csv", [*names, "density"],
               ([*map(float, x), float(v)] for x, v in zip(nodes, dens)))
    return {"rows": int(nodes.shape[0])}


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "grid": cmd_grid, "baseline": cmd_baseline}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args)
    except (UsageError, InvalidArgumentError, UnsupportedDimensionError) as exc:
        parser.error(str(exc))
    except (OSError, GakdeError) as exc:
        print(f"gakde: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
