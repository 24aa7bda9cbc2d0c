"""Choosing k, k_m by elbows and (s, alpha, tau1, tau2) by cross-validated BIC."""

import itertools
import logging
import math

import numpy as np

from .errors import AllGridPointsFailed, DimensionMismatch, LatentGraphError, TooFewCandidates
from .graph_eval import select_edges
from .init import canonical_spectrum, initialize
from .model import FitConfig, b_tilde_full
from .objective import as_covariance, latent_covariance
from .solver import fit

log = logging.getLogger(__name__)

KNEE_TOL = 1e-12
RIDGE_REL = 1e-8


def knee_index(values):
    """Index of the largest interior second difference; 0 when there is no convex knee."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise TooFewCandidates(f"need at least 3 points, got {v.size}")
    second = v[:-2] - 2.0 * v[1:-1] + v[2:]
    j = int(np.argmax(second))
    if second[j] <= KNEE_TOL * max(1.0, np.abs(v).max()):
        return 0
    return j + 1


def truncation_residuals(scores, p, candidates):
    """Mean squared error of keeping the first k scores of each node, for each candidate k."""
    y = np.asarray(scores, dtype=float)
    km = y.shape[0] // p
    per_coord = (y.reshape(p, km, -1) ** 2).mean(axis=(0, 2))
    tail = np.concatenate([np.cumsum(per_coord[::-1])[::-1], [0.0]])
    if max(candidates) > km:
        raise DimensionMismatch(f"candidate {max(candidates)} exceeds available k_m={km}")
    return np.array([tail[k] for k in candidates]) / km


def elbow_from_residuals(residuals, candidates):
    candidates = list(candidates)
    if len(candidates) < 3:
        raise TooFewCandidates(f"need at least 3 candidates, got {len(candidates)}")
    if len(residuals) != len(candidates):
        raise DimensionMismatch("one residual per candidate required")
    return candidates[knee_index(residuals)]


def elbow_k_m(data, candidates):
    """Knee of the truncation residual curve, one value per modality."""
    candidates = list(candidates)
    if len(candidates) < 3:
        raise TooFewCandidates(f"need at least 3 candidates, got {len(candidates)}")
    if candidates != sorted(candidates):
        raise ValueError("candidates must be sorted ascending")
    return tuple(elbow_from_residuals(truncation_residuals(y, data.p, candidates), candidates)
                 for y in data.scores)


def elbow_from_spectrum(spectrum, k_max=None):
    """Index (1-based) just before the largest drop of a descending spectrum."""
    g = np.asarray(spectrum, dtype=float)
    if k_max is not None:
        g = g[:k_max + 1]
    if g.size < 2:
        return 1
    drops = g[:-1] - g[1:]
    return int(np.argmax(drops)) + 1


def elbow_k(data, k_max, node=0):
    if k_max > min(data.k_m):
        raise DimensionMismatch(f"k_max={k_max} exceeds min(k_m)={min(data.k_m)}")
    return elbow_from_spectrum(canonical_spectrum(data, node), k_max)


def residual_grams(data, params):
    """``G_i^m G_i^m^T / N`` for every node and modality, shape ``(M, p, k, k)``."""
    cov = as_covariance(data)
    params.check_against(cov)
    p, k = params.p, params.k
    bt = b_tilde_full(params.b)
    out = np.empty((cov.M, p, k, k))
    for m, (a, s) in enumerate(zip(params.a_mats, cov.covs)):
        full = bt @ latent_covariance(a, s, p) @ bt.T
        for i in range(p):
            out[m, i] = full[i * k:(i + 1) * k, i * k:(i + 1) * k]
    return out


def bic_score(data, params, edges):
    """``sum_i [ sum_m N log det((G G^T + delta I) / 2N) + |N_i| log N ]``; lower is better.

    ``delta = 1e-8 * max(tr(G G^T) / k, 1)`` keeps exact fits finite.
    """
    n = data.N
    k = params.k
    grams = residual_grams(data, params) * n
    total = 0.0
    for g in grams.reshape(-1, k, k):
        delta = RIDGE_REL * max(np.trace(g) / k, 1.0)
        sign, logdet = np.linalg.slogdet((g + delta * np.eye(k)) / (2.0 * n))
        total += n * logdet
    total += sum(edges.degree(i) for i in range(params.p)) * math.log(n)
    return float(total)


def fold_indices(n, folds, seed=0):
    """Deterministic disjoint folds covering ``range(n)`` with sizes differing by at most 1."""
    if folds < 2 or folds > n:
        raise ValueError(f"folds must lie in [2, N={n}], got {folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


def grid_points(grid):
    keys = ("s", "alpha", "tau1", "tau2")
    defaults = {f: getattr(FitConfig(s=1), f) for f in keys[1:]}
    values = [list(grid.get(key, [defaults.get(key)])) for key in keys]
    if any(len(v) == 0 for v in values):
        raise ValueError("every grid axis must be nonempty")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _order_key(point):
    return (point["s"], point["alpha"], point["tau1"], point["tau2"])


def cv_scores(data, grid, folds=5, seed=0, k=None, base=None, init="cca"):
    """Mean validation-fold BIC per grid point; failed points are dropped with a warning."""
    base = base or FitConfig(s=1)
    k = k if k is not None else min(data.k_m)
    parts = fold_indices(data.N, folds, seed)
    out = []
    for point in grid_points(grid):
        cfg = base.with_(**point)
        scores = []
        try:
            for f, val in enumerate(parts):
                train = np.concatenate([q for g, q in enumerate(parts) if g != f])
                tr, va = data.subset(train), data.subset(val)
                start, _ = initialize(tr, k, cfg, method=init)
                params, _ = fit(tr, start, cfg)
                edges = select_edges(params, cfg.eps0, cfg.edge_rule)
                scores.append(bic_score(va, params, edges))
        except (LatentGraphError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("grid point %s dropped: %s", point, exc)
            continue
        out.append((point, float(np.mean(scores))))
    return out


def select_params(data, grid, folds=5, seed=0, k=None, base=None, init="cca"):
    """Grid point with the lowest mean BIC (ties: smaller s, then alpha, then taus)."""
    scored = cv_scores(data, grid, folds, seed, k, base, init)
    if not scored:
        raise AllGridPointsFailed("every grid point failed in some fold")
    best = min(scored, key=lambda ps: (ps[1], _order_key(ps[0])))
    base = base or FitConfig(s=1)
    return base.with_(**best[0])
