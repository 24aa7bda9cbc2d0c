"""Dense symmetric-matrix helpers: inverse square roots, covariances, signs."""

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite

EIG_FLOOR_REL = 1e-10


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


class SpdMatrix:
    """Symmetric positive-definite matrix, validated on construction.

    The input is symmetrized as ``(M + M.T) / 2`` first. Construction fails
    with :class:`NotPositiveDefinite` when the smallest eigenvalue is not above
    ``1e-10 * lambda_max``.
    """

    __slots__ = ("values", "eigvals", "eigvecs")

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {values.shape}")
        values = symmetrize(values)
        w, v = np.linalg.eigh(values)
        lam_max = w[-1] if w.size else 0.0
        if w.size == 0 or lam_max <= 0 or w[0] <= EIG_FLOOR_REL * lam_max:
            lam_min = w[0] if w.size else float("nan")
            raise NotPositiveDefinite(
                f"smallest eigenvalue {lam_min:.3e} below floor {EIG_FLOOR_REL:.0e} * {lam_max:.3e}")
        self.values = values
        self.eigvals = w
        self.eigvecs = v

    @property
    def dim(self):
        return self.values.shape[0]


def _as_spd(m):
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


def inv_sqrt(m):
    """Symmetric inverse square root ``S`` with ``S @ M @ S = I``."""
    m = _as_spd(m)
    v = m.eigvecs
    s = (v / np.sqrt(m.eigvals)) @ v.T
    return symmetrize(s)


def sqrtm_spd(m):
    m = _as_spd(m)
    v = m.eigvecs
    return symmetrize((v * np.sqrt(m.eigvals)) @ v.T)


def sample_covariance(x):
    """Uncentered sample covariance ``X @ X.T / N`` of a (d, N) score matrix."""
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    if n < 1:
        raise DimensionMismatch("sample_covariance needs at least one sample")
    return symmetrize(x @ x.T / n)


def center(x):
    """Subtract per-row means (optional preprocessing; off by default)."""
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=1, keepdims=True)


def sign_align(u_hat, u_star):
    """Diagonal +-1 matrix Q with q_i = sign(<u_hat[:, i], u_star[:, i]>), zero counted as +1."""
    u_hat = np.asarray(u_hat, dtype=float)
    u_star = np.asarray(u_star, dtype=float)
    if u_hat.ndim != 2 or u_star.ndim != 2 or u_hat.shape[1] != u_star.shape[1]:
        raise DimensionMismatch(f"column counts differ: {u_hat.shape} vs {u_star.shape}")
    inner = np.einsum("ij,ij->j", u_hat, u_star)
    return np.diag(np.where(inner >= 0, 1.0, -1.0))
