"""File formats (CSV matrices, JSON configs/results), schema checks and the score projector."""

import csv
import dataclasses
import glob
import hashlib
import json
import os

import numpy as np

from . import __version__
from .errors import FileError, RankDeficient, SchemaError
from .model import FitConfig, GraphEstimate, ModelParams, ScoreBundle
from .synth import GroundTruth, NoiseSpec, SyntheticSpec


def fmt(x):
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(x))


def project_scores(curve_values, time_points, basis):
    """Least-squares basis coefficients for each sampled curve.

    ``curve_values`` is ``(q, N)``; ``basis`` is either a callable mapping the
    ``q`` time points to a ``(q, k_m)`` design matrix or a sequence of scalar
    functions. Returns ``(k_m, N)``.
    """
    h = np.asarray(curve_values, dtype=float)
    t = np.asarray(time_points, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if callable(basis):
        c = np.asarray(basis(t), dtype=float)
    else:
        c = np.column_stack([np.asarray(f(t), dtype=float) * np.ones_like(t) for f in basis])
    if c.shape[0] != t.size or h.shape[0] != t.size:
        raise SchemaError(f"{t.size} time points but design has {c.shape[0]} rows and curves {h.shape[0]}",
                          field="time_points")
    if c.shape[0] < c.shape[1] or np.linalg.matrix_rank(c) < c.shape[1]:
        raise RankDeficient(f"basis evaluations have rank {np.linalg.matrix_rank(c)} < {c.shape[1]}")
    coef, *_ = np.linalg.lstsq(c, h, rcond=None)
    return coef


# ---------- score CSVs ----------

def score_path(directory, m):
    return os.path.join(directory, f"scores_m{m + 1}.csv")


def write_scores(directory, data):
    os.makedirs(directory, exist_ok=True)
    for m, y in enumerate(data.scores):
        km = data.k_m[m]
        with open(score_path(directory, m), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "basis"] + [f"sample_{n + 1}" for n in range(data.N)])
            for row in range(y.shape[0]):
                w.writerow([row // km, row % km] + [fmt(v) for v in y[row]])


def read_score_matrix(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][:2] != ["node", "basis"]:
        raise SchemaError(f"{path}: header must start with node,basis", field="header")
    body = rows[1:]
    try:
        idx = np.array([[int(r[0]), int(r[1])] for r in body], dtype=int).reshape(-1, 2)
        vals = np.array([[float(v) for v in r[2:]] for r in body], dtype=float)
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: malformed row ({exc})", field="scores") from exc
    n = len(rows[0]) - 2
    vals = vals.reshape(len(body), n)
    p = int(idx[:, 0].max()) + 1 if len(body) else 0
    km = int(idx[:, 1].max()) + 1 if len(body) else 0
    expect = np.array([[i, l] for i in range(p) for l in range(km)], dtype=int).reshape(-1, 2)
    if idx.shape != expect.shape or not np.array_equal(idx, expect):
        raise SchemaError(f"{path}: rows must be ordered by node then basis", field="node")
    return p, vals


def read_scores(directory):
    paths = sorted(glob.glob(os.path.join(directory, "scores_m*.csv")),
                   key=lambda s: int(os.path.basename(s)[8:-4]))
    if not paths:
        raise FileError(f"no scores_m*.csv files in {directory}")
    mats = []
    p = None
    for path in paths:
        pm, vals = read_score_matrix(path)
        if p is not None and pm != p:
            raise SchemaError(f"{path}: p={pm} differs from p={p}", field="node")
        p = pm
        mats.append(vals)
    return ScoreBundle(p, tuple(mats))


# ---------- JSON helpers ----------

def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})", field="<document>") from exc


def canonical_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_run_meta(directory, command, seed, config):
    meta = {"command": command, "seed": seed, "config_hash": canonical_hash(config), "version": __version__}
    write_json(os.path.join(directory, "run_meta.json"), meta)
    return meta


def _matrix(x):
    return np.asarray(x, dtype=float).tolist()


# ---------- schema validation ----------

def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


_FIT_RULES = {
    "s": (lambda v: _int(v) and v >= 1, "a positive integer"),
    "alpha": (lambda v: _num(v) and 0 < v <= 1, "a number in (0, 1]"),
    "tau1": (lambda v: _num(v) and v > 0, "a positive number"),
    "tau2": (lambda v: _num(v) and v > 0, "a positive number"),
    "eta_a": (lambda v: _num(v) and v > 0, "a positive number"),
    "eta_b": (lambda v: _num(v) and v > 0, "a positive number"),
    "eta_b0": (lambda v: v is None or (_num(v) and v > 0), "a positive number or null"),
    "max_iter_main": (lambda v: _int(v) and v >= 1, "a positive integer"),
    "max_iter_init": (lambda v: _int(v) and v >= 1, "a positive integer"),
    "tol": (lambda v: _num(v) and v >= 0, "a nonnegative number"),
    "eps0": (lambda v: _num(v) and v >= 0, "a nonnegative number"),
    "edge_rule": (lambda v: v in ("AND", "OR"), "AND or OR"),
}

_SPEC_RULES = {
    "graph": (lambda v: v in ("G1", "G2", "G3", "G4"), "one of G1, G2, G3, G4"),
    "p": (lambda v: _int(v) and v >= 1, "a positive integer"),
    "r": (lambda v: _int(v) and v >= 1, "a positive integer"),
    "r_m": (lambda v: isinstance(v, list) and len(v) >= 1 and all(_int(x) and x >= 1 for x in v),
            "a nonempty list of positive integers"),
    "noise": (lambda v: isinstance(v, dict), "an object"),
    "N": (lambda v: _int(v) and v >= 0, "a nonnegative integer"),
    "seed": (lambda v: _int(v) and 0 <= v < 2 ** 64, "an unsigned 64-bit integer"),
    "offdiag_scale": (lambda v: _num(v) and v > 0, "a positive number"),
    "g4_tau": (lambda v: _num(v) and 0 <= v <= 1, "a number in [0, 1]"),
}

_NOISE_RULES = {
    "model": (lambda v: v in ("NM1", "NM2", "none"), "one of NM1, NM2, none"),
    "sigma": (lambda v: _num(v) and v > 0, "a positive number"),
}


def _check_rules(obj, rules, required, what, prefix=""):
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a JSON object", field=prefix.rstrip(".") or "<document>")
    for key in obj:
        if key not in rules:
            raise SchemaError(f"{what}: unknown field {prefix}{key!r}", field=prefix + key)
    for key in required:
        if key not in obj:
            raise SchemaError(f"{what}: missing required field {prefix}{key!r}", field=prefix + key)
    for key, val in obj.items():
        ok, expect = rules[key]
        if not ok(val):
            raise SchemaError(f"{what}: field {prefix}{key!r} must be {expect}, got {val!r}", field=prefix + key)


def fit_config_from_dict(obj):
    _check_rules(obj, _FIT_RULES, ("s",), "fit config")
    tau1, tau2 = obj.get("tau1", FitConfig.tau1), obj.get("tau2", FitConfig.tau2)
    if tau1 > tau2:
        raise SchemaError(f"fit config: tau1={tau1} exceeds tau2={tau2}", field="tau1")
    return FitConfig(**obj)


def fit_config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def spec_from_dict(obj):
    _check_rules(obj, _SPEC_RULES, ("graph", "p"), "spec")
    if "noise" in obj:
        _check_rules(obj["noise"], _NOISE_RULES, ("model",), "spec", prefix="noise.")
    spec_default = {f.name: f.default for f in dataclasses.fields(SyntheticSpec)
                    if f.default is not dataclasses.MISSING}
    full = {**spec_default, **obj}
    r, r_m = full["r"], full.get("r_m", spec_default["r_m"])
    if min(r_m) < r:
        raise SchemaError(f"spec: every r_m must be >= r={r}", field="r_m")
    noise_model = obj.get("noise", {}).get("model", "NM1")
    if (full["graph"] == "G2" or noise_model == "NM2") and full["p"] % 10:
        raise SchemaError("spec: G2 and NM2 need p to be a multiple of 10", field="p")
    return SyntheticSpec.from_dict(obj)


# ---------- truth, params, edges ----------

def truth_to_dict(truth, spec=None):
    p = truth.p
    support = np.abs(truth.omega.reshape(p, truth.r, p, truth.r)).sum(axis=(1, 3)) > 0
    return {
        "p": p,
        "r": truth.r,
        "edges": sorted([list(e) for e in truth.true_edges.edges]),
        "omega_support": support.astype(int).tolist(),
        "omega": _matrix(truth.omega),
        "a_mats": [_matrix(a) for a in truth.a_mats],
        "l_mats": [_matrix(l) for l in truth.l_mats],
        "noise_covs_diag": [_matrix(np.diag(q)) for q in truth.noise_covs],
    }


def truth_from_dict(obj):
    try:
        p, r = int(obj["p"]), int(obj["r"])
        omega = np.asarray(obj["omega"], dtype=float)
        a_mats = tuple(np.asarray(a, dtype=float) for a in obj["a_mats"])
        l_mats = tuple(np.asarray(l, dtype=float) for l in obj["l_mats"])
        edges = GraphEstimate.from_edges(p, [tuple(e) for e in obj["edges"]])
        noise = tuple(np.diag(np.asarray(q, dtype=float)) for q in obj.get("noise_covs_diag", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"truth file: {exc}", field=str(exc).strip("'")) from exc
    return GroundTruth(omega, l_mats, a_mats, edges, noise, r)


def params_to_dict(params):
    return {"p": params.p, "k": params.k, "k_m": list(params.k_m),
            "a_mats": [_matrix(a) for a in params.a_mats],
            "b": [_matrix(bi) for bi in params.b]}


def params_from_dict(obj):
    try:
        return ModelParams(tuple(np.asarray(a, dtype=float) for a in obj["a_mats"]),
                           np.asarray(obj["b"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"params file: {exc}", field="a_mats" if "a_mats" in str(exc) else "b") from exc


def write_trace(path, trace):
    with_dist = any(d is not None for d in trace.distance)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "max_change"] + (["dist_max", "dist_sum"] if with_dist else []))
        for it, obj, ch, dmax, dsum in zip(trace.iterations, trace.objective, trace.max_rel_change,
                                           trace.distance, trace.distance_sum):
            row = [it, fmt(obj), fmt(ch)]
            if with_dist:
                row += [fmt(dmax), fmt(dsum)]
            w.writerow(row)


def write_edges(path, est):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "norm_ij", "norm_ji", "selected"])
        for i in range(est.p):
            for j in range(i + 1, est.p):
                w.writerow([i, j, fmt(est.block_norms[i, j]), fmt(est.block_norms[j, i]),
                            int((i, j) in est.edges)])


def read_edges(path, p=None):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc}") from exc
    try:
        n = p or (max(int(r["j"]) for r in rows) + 1 if rows else 1)
        norms = np.zeros((n, n))
        edges = set()
        for r in rows:
            i, j = int(r["i"]), int(r["j"])
            norms[i, j], norms[j, i] = float(r["norm_ij"]), float(r["norm_ji"])
            if int(r["selected"]):
                edges.add((i, j))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}", field="edges") from exc
    return GraphEstimate(n, norms, frozenset(edges))
