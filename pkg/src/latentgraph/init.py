"""Initial values: CCA-based transforms and a projected-gradient start for B."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, Diverged, RankDeficient
from .matops import inv_sqrt, sqrtm_spd
from .model import ModelParams, b_from_matrix
from .objective import as_covariance, latent_covariance
from .operators import project_dense

AGGREGATE = "AGGREGATE"
RANK_FLOOR = 1e-6


@dataclass(frozen=True)
class CcaDecomposition:
    """Top-k canonical correlations and directions; ``spectrum`` holds all of them."""

    gamma: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    node_used: object
    spectrum: np.ndarray = None


def _node_blocks(cov, m, i):
    return cov.block(m, i, i)


def _cross_block(data, i):
    y1, y2 = data.node(0, i), data.node(1, i)
    return y1 @ y2.T / data.N


def _check_pair(data, k):
    if data.M != 2:
        raise DimensionMismatch(f"CCA initialization needs M=2 modalities, got {data.M}")
    if k < 1 or k > min(data.k_m):
        raise DimensionMismatch(f"k={k} must lie in [1, min(k_m)={min(data.k_m)}]")


def _svd_signed(r):
    u, g, vt = np.linalg.svd(r)
    v = vt.T
    n = min(u.shape[1], v.shape[1])
    u, v = u[:, :n], v[:, :n]
    piv = np.abs(u).argmax(axis=0)
    sgn = np.where(u[piv, np.arange(n)] < 0, -1.0, 1.0)
    return u * sgn, g, v * sgn


def _from_whitened(r, w1, w2, k, node_used, rank_floor):
    u, g, v = _svd_signed(r)
    gamma = g[:k]
    if gamma[-1] < rank_floor:
        raise RankDeficient(f"canonical correlation gamma_{k}={gamma[-1]:.3e} below floor {rank_floor:g}")
    scale = 1.0 / np.sqrt(gamma)
    a1 = scale[:, None] * (u[:, :k].T @ w1)
    a2 = scale[:, None] * (v[:, :k].T @ w2)
    return a1, a2, CcaDecomposition(gamma, u[:, :k], v[:, :k], node_used, g)


def canonical_spectrum(data, node=0):
    """All singular values of the whitened cross-covariance at ``node``."""
    _check_pair(data, 1)
    cov = as_covariance(data)
    r = inv_sqrt(_node_blocks(cov, 0, node)) @ _cross_block(data, node) @ inv_sqrt(_node_blocks(cov, 1, node))
    return np.linalg.svd(r, compute_uv=False)


def cca_init(data, k, node=0, rank_floor=RANK_FLOOR):
    """Transforms ``A^m = Gamma^{-1/2} V_m^T S_m^{-1/2}`` from one node's covariances."""
    _check_pair(data, k)
    if not 0 <= node < data.p:
        raise DimensionMismatch(f"node {node} out of range for p={data.p}")
    cov = as_covariance(data)
    return cca_from_covariances(_node_blocks(cov, 0, node), _node_blocks(cov, 1, node),
                                _cross_block(data, node), k, node, rank_floor)


def cca_from_covariances(s11, s22, s12, k, node_used=0, rank_floor=RANK_FLOOR):
    """CCA transforms from explicit covariance blocks (sample or population)."""
    w1, w2 = inv_sqrt(s11), inv_sqrt(s22)
    return _from_whitened(w1 @ s12 @ w2, w1, w2, k, node_used, rank_floor)


def cca_init_aggregate(data, k, rank_floor=RANK_FLOOR):
    """As :func:`cca_init`, averaging whitened cross-covariances and covariances over nodes."""
    _check_pair(data, k)
    cov = as_covariance(data)
    r = np.zeros((data.k_m[0], data.k_m[1]))
    s1 = np.zeros((data.k_m[0],) * 2)
    s2 = np.zeros((data.k_m[1],) * 2)
    for i in range(data.p):
        c1, c2 = _node_blocks(cov, 0, i), _node_blocks(cov, 1, i)
        r += inv_sqrt(c1) @ _cross_block(data, i) @ inv_sqrt(c2)
        s1 += c1
        s2 += c2
    r /= data.p
    w1 = inv_sqrt(s1 / data.p)
    w2 = inv_sqrt(s2 / data.p)
    return _from_whitened(r, w1, w2, k, AGGREGATE, rank_floor)


def loadings(cov_block, v, gamma):
    """Loading estimate ``S^{1/2} V Gamma^{1/2}``, the right inverse of the CCA transform."""
    return sqrtm_spd(cov_block) @ v * np.sqrt(gamma)[None, :]


def default_eta_b0(a_mats, data):
    cov = as_covariance(data)
    worst = 0.0
    for a, s in zip(a_mats, cov.covs):
        smax = np.linalg.norm(a, 2)
        worst = max(worst, smax ** 2 * np.linalg.norm(s, 2))
    if worst <= 0:
        return 1.0
    return 1.0 / worst


def node_objectives(bt, latent_covs, k):
    """Per-node ``h_i`` (including the 1/M factor) for the stacked ``Bt``."""
    total = sum(latent_covs) / len(latent_covs)
    return _node_h(bt @ total, bt, k)


def _node_h(prod, bt, k):
    p = bt.shape[0] // k
    return 0.5 * np.einsum("ij,ij->i", prod, bt).reshape(p, k).sum(axis=1)


def init_b(data, a0, cfg, eta_b0=None):
    """Projected gradient descent on every node's ``h_i`` starting from ``B_i = 0``.

    Nodes are independent; each stops on its own once its relative change drops
    below ``cfg.tol``. Returns the ``(p, k, k(p-1))`` stack and the iteration count.
    """
    cov = as_covariance(data)
    a0 = tuple(np.asarray(a, dtype=float) for a in a0)
    if len(a0) != cov.M:
        raise DimensionMismatch(f"{len(a0)} transforms for {cov.M} modalities")
    k = a0[0].shape[0]
    p = cov.p
    cfg.validate_for(p, k)
    for m, (a, km) in enumerate(zip(a0, cov.k_m)):
        if a.shape != (k, km):
            raise DimensionMismatch(f"A^{m} shape {a.shape} != ({k}, {km})")
    if p == 1:
        return np.zeros((1, k, 0)), 0
    eta = eta_b0 or cfg.eta_b0 or default_eta_b0(a0, cov)
    # h_i only sees the modality average of the latent covariances
    lat = sum(latent_covariance(a, s, p) for a, s in zip(a0, cov.covs)) / len(a0)
    n = p * k
    dense = np.zeros((n, n))
    prod = lat.copy()
    h0 = _node_h(prod, np.eye(n), k)
    active = np.ones(p, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iter_init + 1):
        step = prod.reshape(p, k, p, k)
        step[np.arange(p), :, np.arange(p), :] = 0.0
        new = project_dense(dense + eta * prod, p, cfg.s, cfg.alpha)
        rows_new, rows_old = new.reshape(p, -1), dense.reshape(p, -1)
        rows_new[~active] = rows_old[~active]
        if not np.all(np.isfinite(new)):
            raise Diverged("initial B iterate became non-finite")
        diff = np.linalg.norm(rows_new - rows_old, axis=1)
        ref = np.maximum(np.maximum(np.linalg.norm(rows_old, axis=1), np.linalg.norm(rows_new, axis=1)), 1e-300)
        dense = new
        bt = np.eye(n) - dense
        prod = bt @ lat
        h = _node_h(prod, bt, k)
        bad = (h > 10.0 * h0) & active
        if bad.any():
            i = int(np.argmax(bad))
            raise Diverged(f"node {i}: h rose from {h0[i]:.3e} to {h[i]:.3e}")
        active &= ~(diff / ref < cfg.tol)
        if not active.any():
            break
    return b_from_matrix(dense, p), it


def initialize(data, k, cfg, method="cca", node=0):
    """CCA transforms followed by the B start; returns ``(ModelParams, CcaDecomposition)``."""
    if method == "cca":
        a1, a2, dec = cca_init(data, k, node)
    elif method == "cca-aggregate":
        a1, a2, dec = cca_init_aggregate(data, k)
    else:
        raise ValueError(f"unknown init method {method!r}")
    b, _ = init_b(data, (a1, a2), cfg)
    return ModelParams((a1, a2), b), dec

