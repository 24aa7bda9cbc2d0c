"""Alternating projected gradient descent over the transforms and neighbourhood blocks."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Diverged, NonFinite
from .matops import sign_align
from .model import ModelParams, b_from_matrix, b_matrix
from .objective import as_covariance, grad_a_from, latent_covariance
from .operators import clamp_rows, project_dense, project_group_sparse, row_norm_bounds

DIVERGE_FACTOR = 100.0


@dataclass
class FitTrace:
    iterations: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    max_rel_change: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    distance_sum: list = field(default_factory=list)
    converged: bool = False

    def record(self, it, obj, change, dist=None):
        """``dist`` is None or the ``(max, sum)`` pair from :func:`distance_metric`."""
        if self.iterations and it <= self.iterations[-1]:
            raise ValueError("trace iterations must increase")
        self.iterations.append(int(it))
        self.objective.append(float(obj))
        self.max_rel_change.append(float(change))
        self.distance.append(None if dist is None else float(dist[0]))
        self.distance_sum.append(None if dist is None else float(dist[1]))

    def __len__(self):
        return len(self.iterations)

    def rows(self):
        return list(zip(self.iterations, self.objective, self.max_rel_change, self.distance, self.distance_sum))


def a_bounds(a0, tau1, tau2):
    """Frozen row-norm bounds ``(L, U)`` for each initial transform."""
    out = []
    for a in a0:
        sv = np.linalg.svd(a, compute_uv=False)
        out.append(row_norm_bounds(tau1, tau2, sv[-1], sv[0], a.shape[1]))
    return out


def _rel_change(old, new, axes):
    diff = np.linalg.norm(new - old, axis=axes)
    ref = np.maximum(np.maximum(np.linalg.norm(old, axis=axes), np.linalg.norm(new, axis=axes)), 1e-300)
    return diff / ref


def max_rel_change(old, new):
    """Largest relative Frobenius change over every ``A^m`` and every ``B_i``."""
    ch = [float(_rel_change(a, b, None)) for a, b in zip(old.a_mats, new.a_mats)]
    if old.p > 1:
        ch.append(float(_rel_change(old.b, new.b, (1, 2)).max()))
    return max(ch)


def distance_metric(est, truth):
    """Squared distance after sign alignment: ``(max_m dA + max_i dB, sum_m dA + sum_i dB)``."""
    if est.p != truth.p or est.k != truth.k or est.k_m != truth.k_m:
        raise DimensionMismatch(f"estimate (p={est.p}, k={est.k}, k_m={est.k_m}) vs "
                                f"truth (p={truth.p}, k={truth.k}, k_m={truth.k_m})")
    q = np.diag(sign_align(est.a_mats[0].T, truth.a_mats[0].T))
    da = [float(((q[:, None] * a - t) ** 2).sum()) for a, t in zip(est.a_mats, truth.a_mats)]
    if est.p > 1:
        qcols = np.tile(q, est.p - 1)
        aligned = q[None, :, None] * est.b * qcols[None, None, :]
        db = ((aligned - truth.b) ** 2).sum(axis=(1, 2))
    else:
        db = np.zeros(1)
    return max(da) + float(db.max()), sum(da) + float(db.sum())


def project_params(params, bounds, cfg):
    a = tuple(clamp_rows(x, lo, hi) for x, (lo, hi) in zip(params.a_mats, bounds))
    return ModelParams(a, project_group_sparse(params.b, cfg.s, cfg.alpha))


def _zero_diag_blocks(mat, p):
    k = mat.shape[0] // p
    m4 = mat.reshape(p, k, p, k)
    m4[np.arange(p), :, np.arange(p), :] = 0.0
    return mat


def sweep(a_mats, dense, covs, bounds, cfg, p, gram=None):
    """One outer iteration on the dense coefficient matrix ``[B_ij]``.

    Every A step uses the current B; the B step then sees the new A.
    Returns ``(new_a, new_dense, gram, objective)`` where ``gram`` is
    ``Bt^T Bt`` at the new B (reusable by the next sweep).
    """
    n = dense.shape[0]
    bt = np.eye(n) - dense
    gram = bt.T @ bt if gram is None else gram
    new_a = tuple(clamp_rows(a - cfg.eta_a * grad_a_from(bt, a, s, p, gram=gram), lo, hi)
                  for a, s, (lo, hi) in zip(a_mats, covs, bounds))
    lat = sum(latent_covariance(a, s, p, sym=False) for a, s in zip(new_a, covs))
    lat = 0.5 * (lat + lat.T)
    step = _zero_diag_blocks(bt @ lat, p)
    new_dense = project_dense(dense + cfg.eta_b * step, p, cfg.s, cfg.alpha)
    bt_new = np.eye(n) - new_dense
    gram_new = bt_new.T @ bt_new
    obj = 0.5 * float(np.einsum("ij,ij->", gram_new, lat))
    return new_a, new_dense, gram_new, obj


def _row_sq(x):
    return np.einsum("ij,ij->i", x, x)


def _dense_rel_change(old, new, p):
    rows_old = old.reshape(p, -1)
    rows_new = new.reshape(p, -1)
    diff = _row_sq(rows_new - rows_old)
    ref = np.maximum(np.maximum(_row_sq(rows_old), _row_sq(rows_new)), 1e-300)
    return float(np.sqrt((diff / ref).max()))


def fit(data, init, cfg, truth=None, bounds=None, callback=None):
    """Run the alternating projected descent from ``init``.

    ``init`` is projected once before iterating; the row-norm bounds are frozen
    from ``init.a_mats`` unless given. Returns ``(ModelParams, FitTrace)``.
    """
    cov = as_covariance(data)
    init.check_against(cov)
    cfg.validate_for(init.p, init.k)
    p = init.p
    bounds = a_bounds(init.a_mats, cfg.tau1, cfg.tau2) if bounds is None else bounds
    cur = project_params(init, bounds, cfg)
    a_mats, dense = cur.a_mats, b_matrix(cur.b)
    bt = np.eye(dense.shape[0]) - dense
    gram = bt.T @ bt
    lat0 = sum(latent_covariance(a, s, p) for a, s in zip(a_mats, cov.covs))
    obj0 = 0.5 * float(np.einsum("ij,ij->", gram, lat0))
    trace = FitTrace()
    trace.record(0, obj0, 0.0, distance_metric(cur, truth) if truth is not None else None)
    limit = DIVERGE_FACTOR * max(obj0, 1e-300)
    for it in range(1, cfg.max_iter_main + 1):
        new_a, new_dense, gram, obj = sweep(a_mats, dense, cov.covs, bounds, cfg, p, gram)
        if not (np.isfinite(new_dense).all() and all(np.isfinite(a).all() for a in new_a)):
            raise NonFinite(f"non-finite parameters at iteration {it}")
        if obj > limit:
            raise Diverged(f"objective {obj:.4e} exceeds {DIVERGE_FACTOR:g}x initial {obj0:.4e} at iteration {it}")
        change = max(float(_rel_change(a, b, None)) for a, b in zip(a_mats, new_a))
        if p > 1:
            change = max(change, _dense_rel_change(dense, new_dense, p))
        a_mats, dense = new_a, new_dense
        dist = None
        if truth is not None or callback is not None:
            cur = ModelParams(a_mats, b_from_matrix(dense, p))
            dist = distance_metric(cur, truth) if truth is not None else None
            if callback is not None:
                callback(it, cur)
        trace.record(it, obj, change, dist)
        if change < cfg.tol:
            trace.converged = True
            break
    return ModelParams(a_mats, b_from_matrix(dense, p)), trace
