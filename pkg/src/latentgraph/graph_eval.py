"""Edge selection from fitted blocks, TPR/FPR against a true graph, ROC and AUC."""

import itertools
import logging

import numpy as np

from .errors import DegenerateTruth, DimensionMismatch, LatentGraphError
from .model import EDGE_RULES, GraphEstimate

log = logging.getLogger(__name__)


def pair_norms(params):
    """``(p, p)`` matrix of ``||B_ij||_F`` with a zero diagonal."""
    d = params.dense_blocks()
    return np.sqrt((d ** 2).sum(axis=(2, 3)))


def edges_from_norms(norms, eps0, rule="AND"):
    if rule not in EDGE_RULES:
        raise ValueError(f"rule must be one of {EDGE_RULES}, got {rule!r}")
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    hit = norms >= eps0
    both = hit & hit.T if rule == "AND" else hit | hit.T
    i, j = np.nonzero(np.triu(both, 1))
    return frozenset(zip(i.tolist(), j.tolist()))


def select_edges(params, eps0, rule="AND"):
    norms = pair_norms(params)
    return GraphEstimate(params.p, norms, edges_from_norms(norms, eps0, rule), rule, eps0)


def confusion(est, truth):
    """(TPR, FPR) over unordered node pairs."""
    if est.p != truth.p:
        raise DimensionMismatch(f"estimate has p={est.p}, truth has p={truth.p}")
    p = truth.p
    n_pairs = p * (p - 1) // 2
    n_true = len(truth.edges)
    n_false = n_pairs - n_true
    if n_true == 0:
        raise DegenerateTruth("true graph has no edges; TPR undefined")
    if n_false == 0:
        raise DegenerateTruth("true graph is complete; FPR undefined")
    tp = len(est.edges & truth.edges)
    fp = len(est.edges - truth.edges)
    return tp / n_true, fp / n_false


def brute_force_confusion(est_edges, true_edges, p):
    """Ordered-pair enumeration of the TPR/FPR formulas; slow reference implementation."""
    def has(edges, i, j):
        return (min(i, j), max(i, j)) in edges
    tp = pos = fp = neg = 0
    for i, j in itertools.permutations(range(p), 2):
        if has(true_edges, i, j):
            pos += 1
            tp += has(est_edges, i, j) and has(est_edges, j, i)
        else:
            neg += 1
            fp += has(est_edges, i, j) or has(est_edges, j, i)
    if pos == 0 or neg == 0:
        raise DegenerateTruth("degenerate true graph")
    return tp / pos, fp / neg


def finish_curve(points):
    """Sort by FPR (then TPR), drop duplicates and add the (0,0), (1,1) anchors."""
    pts = {(float(f), float(t)) for f, t in points}
    pts |= {(0.0, 0.0), (1.0, 1.0)}
    return sorted(pts)


def roc_curve(fit_fn, sweep, truth):
    """One confusion point per sweep value; ``fit_fn(v)`` returns a GraphEstimate."""
    if len(sweep) == 0:
        raise ValueError("sweep must be nonempty")
    pts = []
    for v in sweep:
        try:
            est = fit_fn(v)
        except (LatentGraphError, np.linalg.LinAlgError) as exc:
            log.warning("sweep value %r failed: %s", v, exc)
            continue
        tpr, fpr = confusion(est, truth)
        pts.append((fpr, tpr))
    return finish_curve(pts)


def eps_roc_curve(params, truth, eps_values=None, rule="AND"):
    """ROC from thresholding one fit at many eps0 values."""
    norms = pair_norms(params)
    if eps_values is None:
        eps_values = np.unique(np.minimum(norms, norms.T) if rule == "AND" else np.maximum(norms, norms.T))
        eps_values = np.append(eps_values[eps_values > 0], np.inf)
    pts = []
    for eps in eps_values:
        est = GraphEstimate(params.p, norms, edges_from_norms(norms, eps, rule), rule, float(eps))
        tpr, fpr = confusion(est, truth)
        pts.append((fpr, tpr))
    return finish_curve(pts)


def auc(curve):
    c = np.asarray(curve, dtype=float)
    return float(np.trapezoid(c[:, 1], c[:, 0]))


def auc15(curve, limit=0.15):
    """Area for FPR in [0, limit], normalized by ``limit``."""
    c = np.asarray(curve, dtype=float)
    x, y = c[:, 0], c[:, 1]
    keep = x < limit
    xs = np.append(x[keep], limit)
    ys = np.append(y[keep], np.interp(limit, x, y))
    return float(np.trapezoid(ys, xs) / limit)
