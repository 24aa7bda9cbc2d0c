"""Projection operators used by the solver.

``truncate_group_sparse`` keeps the ``s`` largest k-by-k blocks of a
neighbourhood matrix, ``hard_threshold_rc`` keeps entries that are among the
``floor(alpha k)`` largest of both their row and column, and
``project_row_norms`` clamps row norms of a transformation matrix.
Ties are always broken towards the lower index.
"""

import math

import numpy as np

from .errors import BoundsInfeasible


def _split_blocks(b, k):
    # (..., k, k*(n)) -> (..., n, k, k)
    lead = b.shape[:-2]
    n = b.shape[-1] // k
    return b.reshape(*lead, k, n, k).swapaxes(-3, -2)


def _join_blocks(blocks):
    lead = blocks.shape[:-3]
    n, k = blocks.shape[-3], blocks.shape[-1]
    return blocks.swapaxes(-3, -2).reshape(*lead, k, n * k)


def block_norms(b, k=None):
    """Frobenius norms of the k-by-k blocks of ``b`` (last axis split into blocks)."""
    b = np.asarray(b, dtype=float)
    k = b.shape[-2] if k is None else k
    return np.sqrt((_split_blocks(b, k) ** 2).sum(axis=(-2, -1)))


def truncate_group_sparse(b, s):
    """Zero all but the ``s`` largest-norm blocks of ``b`` (shape ``(..., k, k(p-1))``)."""
    b = np.asarray(b, dtype=float)
    k = b.shape[-2]
    n = b.shape[-1] // k
    if s >= n:
        return b.copy()
    norms = block_norms(b, k)
    order = np.argsort(-norms, axis=-1, kind="stable")
    keep = np.zeros(norms.shape, dtype=bool)
    np.put_along_axis(keep, order[..., :s], True, axis=-1)
    blocks = _split_blocks(b, k) * keep[..., None, None]
    return _join_blocks(blocks)


def _top_mask(mag, t, axis):
    order = np.argsort(-mag, axis=axis, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(mag.shape[axis]).reshape(
        [-1 if ax == (axis % mag.ndim) else 1 for ax in range(mag.ndim)]), axis=axis)
    return ranks < t


def hard_threshold_rc(b, alpha):
    """Keep entry (u, v) iff it is a top-``floor(alpha k)`` magnitude in row u and in column v.

    Works on a single ``(k, k)`` block or any stack ``(..., k, k)``.
    """
    b = np.asarray(b, dtype=float)
    k = b.shape[-1]
    t = math.floor(alpha * k + 1e-12)
    if t >= k:
        return b.copy()
    mag = np.abs(b)
    keep = _top_mask(mag, t, axis=-1) & _top_mask(mag, t, axis=-2)
    return np.where(keep, b, 0.0)


def project_group_sparse(b, s, alpha):
    """``H_alpha`` applied blockwise after ``T_s``; accepts ``(..., k, k(p-1))``."""
    b = truncate_group_sparse(b, s)
    k = b.shape[-2]
    if math.floor(alpha * k + 1e-12) >= k:
        return b
    return _join_blocks(hard_threshold_rc(_split_blocks(b, k), alpha))


def row_norm_bounds(tau1, tau2, sigma_min0, sigma_max0, k_m):
    lower = math.sqrt(tau1) * sigma_min0
    upper = math.sqrt(tau2 / k_m) * sigma_max0
    if lower > upper:
        raise BoundsInfeasible(f"row-norm bounds infeasible: lower {lower:.6g} > upper {upper:.6g}")
    return lower, upper


def project_row_norms(a, tau1, tau2, sigma_min0, sigma_max0, k_m):
    """Nearest matrix (Frobenius) whose row norms all lie in ``[L, U]``.

    ``L = sqrt(tau1) * sigma_min0`` and ``U = sqrt(tau2 / k_m) * sigma_max0``.
    A zero row is sent to ``L * e_1``.
    """
    lower, upper = row_norm_bounds(tau1, tau2, sigma_min0, sigma_max0, k_m)
    return clamp_rows(a, lower, upper)


def clamp_rows(a, lower, upper):
    a = np.asarray(a, dtype=float)
    out = a.copy()
    norms = np.linalg.norm(a, axis=1)
    for r, nr in enumerate(norms):
        if nr == 0.0:
            if lower > 0:
                out[r] = 0.0
                out[r, 0] = lower
        elif nr < lower:
            out[r] = a[r] * (lower / nr)
        elif nr > upper:
            out[r] = a[r] * (upper / nr)
    return out


def project_dense(d, p, s, alpha):
    """``H_alpha o T_s`` applied to every block row of the dense ``(pk, pk)`` coefficient matrix.

    Block ``(i, j)`` of ``d`` holds ``B_ij``; diagonal blocks must be zero and stay zero.
    Neighbour order (and therefore tie-breaking) matches the stacked layout.
    """
    k = d.shape[0] // p
    d4 = d.reshape(p, k, p, k)
    out = d4.copy()
    if s < p - 1:
        norms = np.sqrt(np.einsum("iajb,iajb->ij", d4, d4))
        np.fill_diagonal(norms, -1.0)
        order = np.argsort(-norms, axis=1, kind="stable")
        keep = np.zeros((p, p), dtype=bool)
        np.put_along_axis(keep, order[:, :s], True, axis=1)
        out *= keep[:, None, :, None]
    if math.floor(alpha * k + 1e-12) < k:
        blocks = out.transpose(0, 2, 1, 3)
        out = hard_threshold_rc(blocks, alpha).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(out).reshape(p * k, p * k)
