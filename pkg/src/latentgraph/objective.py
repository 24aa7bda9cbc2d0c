"""Least-squares objective over (A, B) and its analytic gradients.

Everything is computed from the per-modality sample covariance, so the cost
per evaluation does not depend on N. With ``C^m = (I (x) A^m) S^m (I (x) A^m)^T``
(the latent covariance) and ``Bt`` the stacked ``B~_i`` rows::

    f        = 1/2 sum_m tr(Bt C^m Bt^T)
    grad_B   = -sum_m (Bt C^m) restricted to off-diagonal blocks
    grad_A^m = sum_j [Bt^T Bt (I (x) A^m) S^m]_{jj}
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import ScoreBundle, b_tilde, b_tilde_full, dense_to_blocks


@dataclass(frozen=True)
class SampleCovariance:
    """Per-modality ``(p k_m, p k_m)`` covariance, sample or population."""

    p: int
    covs: tuple

    @classmethod
    def from_bundle(cls, data):
        return cls(data.p, data.covariances())

    @property
    def M(self):
        return len(self.covs)

    @property
    def k_m(self):
        return tuple(c.shape[0] // self.p for c in self.covs)

    def block(self, m, i, j):
        km = self.k_m[m]
        return self.covs[m][i * km:(i + 1) * km, j * km:(j + 1) * km]


def as_covariance(data):
    if isinstance(data, SampleCovariance):
        return data
    if isinstance(data, ScoreBundle):
        return SampleCovariance.from_bundle(data)
    raise TypeError(f"expected ScoreBundle or SampleCovariance, got {type(data).__name__}")


def _check(params, cov):
    if cov.p != params.p or cov.M != params.M or cov.k_m != params.k_m:
        raise DimensionMismatch(
            f"params (p={params.p}, k_m={params.k_m}) vs data (p={cov.p}, k_m={cov.k_m})")


def transformed_cross(a, cov_m, p):
    """``(I (x) A) S`` reshaped to ``(p, k, p, k_m)``."""
    k, km = a.shape
    x = np.matmul(a, cov_m.reshape(p, km, p * km))
    return x.reshape(p, k, p, km)


def latent_covariance(a, cov_m, p, cross=None, sym=True):
    """``(I (x) A) S (I (x) A)^T`` as a ``(p k, p k)`` matrix."""
    k, km = a.shape
    x = transformed_cross(a, cov_m, p) if cross is None else cross
    c = (x.reshape(-1, km) @ a.T).reshape(p * k, p * k)
    return 0.5 * (c + c.T) if sym else c


def objective_value(params, data):
    """f(A, B) through the covariance / ``B~`` form."""
    cov = as_covariance(data)
    _check(params, cov)
    bt = b_tilde_full(params.b)
    total = 0.0
    for a, s in zip(params.a_mats, cov.covs):
        c = latent_covariance(a, s, params.p)
        total += 0.5 * np.einsum("ij,ij->", bt @ c, bt)
    return float(total)


def objective_residual(params, data):
    """f(A, B) summed directly over node residuals ``A Y_i - sum_j B_ij A Y_j``."""
    if not isinstance(data, ScoreBundle):
        raise TypeError("the residual form needs raw scores")
    params.check_against(data)
    p, n = params.p, data.N
    total = 0.0
    for m, a in enumerate(params.a_mats):
        z = [a @ data.node(m, i) for i in range(p)]
        for i in range(p):
            r = z[i].copy()
            for j in range(p):
                if j != i:
                    r -= params.block(i, j) @ z[j]
            total += (r ** 2).sum() / (2.0 * n)
    return float(total)


def objective_from_latent(bt, latent_covs):
    return float(sum(0.5 * np.einsum("ij,ij->", bt @ c, bt) for c in latent_covs))


def grad_a_from(bt, a, cov_m, p, gram=None, cross=None):
    """``sum_j [Bt^T Bt (I (x) A) S]_jj``; ``gram`` = ``Bt^T Bt`` may be passed in."""
    k, km = a.shape
    gram = bt.T @ bt if gram is None else gram
    x = transformed_cross(a, cov_m, p) if cross is None else cross
    g = gram.reshape(p, k, p * k)
    xj = x.reshape(p * k, p, km).transpose(1, 0, 2)
    return np.matmul(g, xj).sum(axis=0)


def grad_a(params, data, m):
    """Gradient of f with respect to ``A^m``."""
    cov = as_covariance(data)
    _check(params, cov)
    return grad_a_from(b_tilde_full(params.b), params.a_mats[m], cov.covs[m], params.p)


def grad_b_from(bt, latent_covs, p, k):
    """All neighbourhood gradients as a ``(p, k, k(p-1))`` stack."""
    total = latent_covs[0] if len(latent_covs) == 1 else sum(latent_covs)
    prod = bt @ total
    dense = (-prod).reshape(p, k, p, k).transpose(0, 2, 1, 3)
    return dense_to_blocks(dense)


def grad_b_all(params, data):
    cov = as_covariance(data)
    _check(params, cov)
    lat = [latent_covariance(a, s, params.p) for a, s in zip(params.a_mats, cov.covs)]
    return grad_b_from(b_tilde_full(params.b), lat, params.p, params.k)


def grad_b(params, data, i):
    """Gradient of f with respect to ``B_i`` (shape ``(k, k(p-1))``)."""
    cov = as_covariance(data)
    _check(params, cov)
    p, k = params.p, params.k
    bti = b_tilde(params.b[i], i)
    g = np.zeros((k, p * k))
    for a, s in zip(params.a_mats, cov.covs):
        g -= bti @ latent_covariance(a, s, p)
    return np.hstack([g[:, :i * k], g[:, (i + 1) * k:]])
