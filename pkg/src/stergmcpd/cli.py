"""Command-line entry point: ``stergm-cpd {detect,simulate,evaluate,bench}``.

Every option can also come from a YAML or JSON manifest passed with
``--manifest``; keys are option names (``lambda_grid`` or ``lambda-grid``).
Options given on the command line win over the manifest.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import yaml

from .detect import DEFAULT_LAMBDA_GRID, DetectionConfig, detect_change_points
from .evaluate import all_metrics, canonical, format_extended
from .io import emit_results, ingest_series, read_returns, returns_to_networks, write_csv, write_series
from .network import NetworkError
from .simulate import DEFAULT_CHANGE_POINTS, SbmScenario, scenario2, simulate_sbm_series, simulate_stergm_series
from .solver import SolverConfig, SolverError
from .stats import StatisticSpec

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

logger = logging.getLogger("stergmcpd")


class InputError(Exception):
    pass


def _float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and solver")
    g.add_argument("--spec", help='terms per model, e.g. "form=edges,mutual;diss=edges,mutual"')
    g.add_argument("--lambda-grid", type=_float_list, default=DEFAULT_LAMBDA_GRID)
    g.add_argument("--alpha0", type=float, default=10.0)
    g.add_argument("--admm-iters", type=int, default=200)
    g.add_argument("--newton-iters", type=int, default=20)
    g.add_argument("--gl-iters", type=int, default=20)
    g.add_argument("--tol", type=float, default=1e-7, help="ADMM relative stopping tolerance")
    g.add_argument("--quantile", type=float, default=0.9)
    g.add_argument("--delta-spc", type=int, default=5)
    g.add_argument("--delta-end", type=int, help="default 5 for simulated data, 10 for ingested data")
    g.add_argument("--bic-likelihood", choices=("refit", "fitted"), default="refit")


def _add_scenario_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--scenario", choices=("sbm", "stergm"), default="sbm")
    g.add_argument("--n", type=int, default=50)
    g.add_argument("--T", type=int, default=100)
    g.add_argument("--rho", type=float, default=0.5)
    g.add_argument("--p-sim", type=int, choices=(4, 6, 8), default=4)
    g.add_argument("--change-points", type=_int_list, default=DEFAULT_CHANGE_POINTS)
    g.add_argument("--mh-sweeps", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stergm-cpd", description="Change point detection for dynamic networks."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    def common(p):
        p.add_argument("--manifest", help="YAML or JSON file with option values")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("detect", help="detect change points in a network series")
    parser.subcommands["detect"] = p
    common(p)
    p.add_argument("--input", help="series file, or a returns CSV with --format returns")
    p.add_argument("--format", choices=("dense", "edgelist", "returns"), default="dense")
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--truth", type=_int_list, help="true change points, to also write metrics")
    _add_fit_options(p)

    p = sub.add_parser("simulate", help="write a simulated network series")
    parser.subcommands["simulate"] = p
    common(p)
    p.add_argument("--format", choices=("dense", "edgelist"), default="dense")
    _add_scenario_options(p)

    p = sub.add_parser("evaluate", help="compare detected and true change points")
    parser.subcommands["evaluate"] = p
    common(p)
    p.add_argument("--input", help="summary.json from detect; supplies detected points and T")
    p.add_argument("--detected", type=_int_list)
    p.add_argument("--truth", type=_int_list, required=False)
    p.add_argument("--T", type=int)

    p = sub.add_parser("bench", help="simulate, detect and evaluate over replicates")
    parser.subcommands["bench"] = p
    common(p)
    p.add_argument("--replicates", type=int, default=10)
    _add_scenario_options(p)
    _add_fit_options(p)
    return parser


def load_manifest(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InputError(f"manifest {path} must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


_CONVERTERS = {
    "lambda_grid": _float_list,
    "change_points": _int_list,
    "truth": _int_list,
    "detected": _int_list,
}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "manifest", None):
        manifest = load_manifest(args.manifest)
        manifest.pop("command", None)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(manifest) - known)
        if unknown:
            raise InputError(f"unknown manifest keys: {', '.join(unknown)}")
        sub.set_defaults(**{k: _CONVERTERS.get(k, lambda v: v)(v) for k, v in manifest.items()})
        args = parser.parse_args(argv)
    return args


def _spec_for(args, directed: bool) -> StatisticSpec:
    if args.spec:
        return StatisticSpec.parse(args.spec)
    terms = ("edges", "mutual") if directed else ("edges", "triangles")
    return StatisticSpec(terms, terms)


def _configs(args, delta_end_default: int) -> tuple[SolverConfig, DetectionConfig]:
    solver = SolverConfig(
        alpha0=args.alpha0,
        max_admm_iters=args.admm_iters,
        newton_iters=args.newton_iters,
        group_lasso_iters=args.gl_iters,
        admm_tol=args.tol,
    )
    det = DetectionConfig(
        quantile_level=args.quantile,
        delta_spc=args.delta_spc,
        delta_end=delta_end_default if args.delta_end is None else args.delta_end,
        lambda_grid=tuple(args.lambda_grid),
        bic_likelihood=args.bic_likelihood,
    )
    return solver, det


def _scenario_series(args, seed: int):
    if args.scenario == "sbm":
        sc = SbmScenario(n=args.n, T=args.T, change_points=tuple(args.change_points), rho=args.rho, seed=seed)
        return simulate_sbm_series(sc), StatisticSpec(("edges", "mutual"), ("edges", "mutual"))
    sc = scenario2(
        args.p_sim, n=args.n, T=args.T, change_points=tuple(args.change_points),
        mh_sweeps=args.mh_sweeps, seed=seed,
    )
    return simulate_stergm_series(sc), sc.spec


def _outdir(args) -> Path:
    if not args.out:
        raise InputError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_detect(args) -> int:
    if not args.input:
        raise InputError("--input is required")
    if args.format == "returns":
        returns, _ = read_returns(args.input)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            series = returns_to_networks(returns, args.window)
        for w in caught:
            logger.warning("%s", w.message)
    else:
        series = ingest_series(args.input, args.format)
    spec = _spec_for(args, series.directed)
    spec.validate(series.directed, series.attributes)
    solver, det = _configs(args, delta_end_default=10)
    out = _outdir(args)
    result = detect_change_points(series, spec, solver, det)
    emit_results(result, out, truth=args.truth)
    print(f"K={result.K} change_points={list(result.change_points)} lambda={format_extended(result.best.lam)}")
    if all(f.failed for f in result.fits):
        logger.error("every lambda failed; diagnostics written to %s", out)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate(args) -> int:
    series, _ = _scenario_series(args, args.seed)
    out = _outdir(args)
    ext = "txt" if args.format == "dense" else "edges"
    path = out / f"series.{ext}"
    write_series(series, path, args.format)
    print(path)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    detected, T = args.detected, args.T
    if args.input:
        summary = json.loads(Path(args.input).read_text(encoding="utf-8"))
        detected = summary["change_points"] if detected is None else detected
        T = summary["T"] if T is None else T
    if detected is None or T is None or args.truth is None:
        raise InputError("evaluate needs detected points, --truth and --T (or --input)")
    m = all_metrics(canonical(detected, T), canonical(args.truth, T), T)
    for k, v in m.items():
        print(f"{k}={format_extended(v)}")
    if args.out:
        write_csv(_outdir(args) / "metrics.csv", list(m), [[format_extended(v) for v in m.values()]])
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.replicates < 1:
        raise InputError("--replicates must be at least 1")
    out = _outdir(args)
    solver, det = _configs(args, delta_end_default=5)
    rows, timings, metrics = [], [], []
    failures = 0
    for r in range(args.replicates):
        seed = args.seed + r
        t0 = time.perf_counter()
        series, spec = _scenario_series(args, seed)
        result = detect_change_points(series, spec, solver, det)
        elapsed = time.perf_counter() - t0
        failures += all(f.failed for f in result.fits)
        m = all_metrics(result.change_points, args.change_points, args.T)
        metrics.append(m)
        rows.append(
            [str(r), str(seed), format_extended(result.best.lam),
             " ".join(str(c) for c in result.change_points)]
            + [format_extended(v) for v in m.values()]
        )
        timings.append([str(r), str(seed), format(elapsed, ".3f")])
        logger.info("replicate %d: %s (%.1fs)", r, result.change_points, elapsed)
    keys = list(metrics[0])
    with np.errstate(invalid="ignore"):
        means = [float(np.mean([m[k] for m in metrics])) for k in keys]
    rows.append(["mean", "", "", ""] + [format_extended(v) if not math.isnan(v) else "nan" for v in means])
    write_csv(out / "bench.csv", ["replicate", "seed", "lambda", "change_points"] + keys, rows)
    # wall-clock times go to their own file so bench.csv stays reproducible
    write_csv(out / "timings.csv", ["replicate", "seed", "seconds"], timings)
    for k, v in zip(keys, means):
        print(f"mean {k}={format_extended(v) if not math.isnan(v) else 'nan'}")
    return EXIT_NUMERIC if failures else EXIT_OK


COMMANDS = {"detect": cmd_detect, "simulate": cmd_simulate, "evaluate": cmd_evaluate, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (InputError, OSError, yaml.YAMLError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, NetworkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
