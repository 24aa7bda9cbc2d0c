"""Command-line entry point: simulate, fit, evaluate, sweep, select."""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import dataio
from .errors import LatentGraphError, SchemaError
from .graph_eval import auc, auc15, confusion, eps_roc_curve, select_edges
from .init import initialize
from .model import FitConfig
from .selection import select_params
from .solver import distance_metric, fit
from .synth import simulate

GRID_KEYS = ("s", "alpha", "tau1", "tau2")
VARY_KEYS = ("s", "N", "k")


def _load_spec(path):
    return dataio.spec_from_dict(dataio.read_json(path))


def _load_config(path):
    return dataio.fit_config_from_dict(dataio.read_json(path))


def _load_grid(path):
    grid = dataio.read_json(path)
    if not isinstance(grid, dict):
        raise SchemaError("grid must be a JSON object", field="<document>")
    for key, vals in grid.items():
        if key not in GRID_KEYS:
            raise SchemaError(f"grid: unknown field {key!r}", field=key)
        if not isinstance(vals, list) or not vals:
            raise SchemaError(f"grid: field {key!r} must be a nonempty list", field=key)
        for v in vals:
            probe = {"s": 1, key: v}
            dataio.fit_config_from_dict(probe)
    return grid


def parse_vary(text):
    """``s=1..10`` (inclusive range) or ``N=100,200,400`` -> ``(name, [values])``."""
    name, sep, rest = text.partition("=")
    if not sep or name not in VARY_KEYS:
        raise SchemaError(f"--vary must look like s=1..P, N=list or k=list, got {text!r}", field="vary")
    try:
        if ".." in rest:
            lo, hi = (int(x) for x in rest.split(".."))
            values = list(range(lo, hi + 1))
        else:
            values = [int(x) for x in rest.split(",") if x.strip()]
    except ValueError as exc:
        raise SchemaError(f"--vary values must be integers: {exc}", field="vary") from exc
    if not values or min(values) < 1:
        raise SchemaError("--vary needs at least one positive value", field="vary")
    return name, values


def cmd_simulate(args):
    raw = dataio.read_json(args.spec)
    spec = dataio.spec_from_dict(raw)
    data, truth = simulate(spec)
    os.makedirs(args.out, exist_ok=True)
    dataio.write_scores(args.out, data)
    dataio.write_json(os.path.join(args.out, "truth.json"), dataio.truth_to_dict(truth))
    dataio.write_json(os.path.join(args.out, "spec.json"), spec.to_dict())
    dataio.write_run_meta(args.out, "simulate", spec.seed, spec.to_dict())


def cmd_fit(args):
    cfg = _load_config(args.config)
    data = dataio.read_scores(args.data)
    k = args.k if args.k is not None else min(data.k_m)
    truth = None
    if args.truth:
        truth = dataio.truth_from_dict(dataio.read_json(args.truth)).params()
    start, _ = initialize(data, k, cfg, method=args.init)
    params, trace = fit(data, start, cfg, truth=truth)
    est = select_edges(params, cfg.eps0, cfg.edge_rule)
    os.makedirs(args.out, exist_ok=True)
    dataio.write_json(os.path.join(args.out, "params.json"), dataio.params_to_dict(params))
    dataio.write_trace(os.path.join(args.out, "trace.csv"), trace)
    dataio.write_edges(os.path.join(args.out, "edges.csv"), est)
    meta = {"config": dataio.fit_config_to_dict(cfg), "init": args.init, "k": k}
    dataio.write_run_meta(args.out, "fit", None, meta)


def cmd_evaluate(args):
    truth = dataio.truth_from_dict(dataio.read_json(args.truth))
    est = dataio.read_edges(os.path.join(args.est, "edges.csv"), truth.p)
    tpr, fpr = confusion(est, truth.true_edges)
    metrics = {"tpr": tpr, "fpr": fpr, "n_selected": len(est.edges), "n_true": len(truth.true_edges.edges)}
    params_path = os.path.join(args.est, "params.json")
    if os.path.exists(params_path):
        params = dataio.params_from_dict(dataio.read_json(params_path))
        curve = eps_roc_curve(params, truth.true_edges)
        metrics["eps_auc"] = auc(curve)
        metrics["eps_auc15"] = auc15(curve)
        ref = truth.params()
        if (params.p, params.k, params.k_m) == (ref.p, ref.k, ref.k_m):
            metrics["dist_max"], metrics["dist_sum"] = distance_metric(params, ref)
    dataio.write_json(args.out, metrics)
    dataio.write_run_meta(os.path.dirname(os.path.abspath(args.out)), "evaluate", None,
                          {"est": args.est, "truth": args.truth})


def sweep_job(spec, cfg, name, value, replicate, init):
    """One (sweep value, replicate) cell; returns a CSV row dict."""
    seed = spec.seed + replicate
    spec_r = replace(spec, seed=seed, **({"N": value} if name == "N" else {}))
    k = value if name == "k" else spec.r
    cfg_r = cfg.with_(s=value) if name == "s" else cfg
    data, truth = simulate(spec_r)
    ref = truth.params() if k == spec.r else None
    row = {"vary": name, "value": value, "replicate": replicate, "seed": seed}
    try:
        start, _ = initialize(data, k, cfg_r, method=init)
        params, trace = fit(data, start, cfg_r)
        tpr, fpr = confusion(select_edges(params, cfg_r.eps0, cfg_r.edge_rule), truth.true_edges)
        dmax, dsum = distance_metric(params, ref) if ref is not None else (float("nan"), float("nan"))
        row.update(tpr=tpr, fpr=fpr, dist_max=dmax, dist_sum=dsum, objective=trace.objective[-1],
                   iterations=trace.iterations[-1], converged=int(trace.converged), error="")
    except (LatentGraphError, np.linalg.LinAlgError) as exc:
        nan = float("nan")
        row.update(tpr=nan, fpr=nan, dist_max=nan, dist_sum=nan, objective=nan, iterations=0,
                   converged=0, error=getattr(exc, "code", type(exc).__name__))
    return row


SWEEP_FIELDS = ["vary", "value", "replicate", "seed", "tpr", "fpr", "dist_max", "dist_sum",
                "objective", "iterations", "converged", "error"]


def worker_count(jobs):
    env = os.environ.get("LATENTGRAPH_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def cmd_sweep(args):
    spec = _load_spec(args.spec)
    cfg = _load_config(args.config) if args.config else FitConfig(s=1)
    name, values = parse_vary(args.vary)
    if name == "s" and max(values) > spec.p - 1:
        raise SchemaError(f"--vary s reaches {max(values)} > p-1={spec.p - 1}", field="vary")
    cells = [(v, r) for v in values for r in range(args.replicates)]
    workers = worker_count(len(cells))
    if workers == 1:
        rows = [sweep_job(spec, cfg, name, v, r, args.init) for v, r in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_job, spec, cfg, name, v, r, args.init) for v, r in cells]
            rows = [f.result() for f in futures]
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({key: dataio.fmt(v) if isinstance(v, float) else v for key, v in row.items()})
    dataio.write_run_meta(os.path.dirname(os.path.abspath(args.out)), "sweep", spec.seed,
                          {"spec": spec.to_dict(), "config": dataio.fit_config_to_dict(cfg),
                           "vary": args.vary, "replicates": args.replicates, "init": args.init})


def cmd_select(args):
    grid = _load_grid(args.grid)
    base = _load_config(args.config) if args.config else None
    data = dataio.read_scores(args.data)
    chosen = select_params(data, grid, folds=args.folds, seed=args.seed, k=args.k, base=base, init=args.init)
    dataio.write_json(args.out, dataio.fit_config_to_dict(chosen))
    dataio.write_run_meta(os.path.dirname(os.path.abspath(args.out)), "select", args.seed,
                          {"grid": grid, "folds": args.folds})


def build_parser():
    ap = argparse.ArgumentParser(prog="latentgraph", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset and its ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="initialize and run the alternating solver")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", choices=("cca", "cca-aggregate"), default="cca")
    p.add_argument("--k", type=int, default=None, help="latent dimension (default: min k_m)")
    p.add_argument("--truth", default=None, help="truth.json; adds distance columns to trace.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="compare a fit's edges with the true graph")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="replicated simulate+fit over one varying parameter")
    p.add_argument("--spec", required=True)
    p.add_argument("--vary", required=True, help="s=1..P, N=100,200 or k=3,5")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--init", choices=("cca", "cca-aggregate"), default="cca")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select", help="cross-validated BIC over a parameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--init", choices=("cca", "cca-aggregate"), default="cca")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)
    return ap


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SchemaError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except LatentGraphError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
