"""Synthetic multimodal latent graphs: precision matrices, transforms, noise, samples.

Random streams are keyed by ``(seed, stream tag, index)`` so that e.g. sample
``n`` depends only on ``(seed, n)``; growing N keeps earlier samples intact.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient
from .matops import symmetrize
from .model import GraphEstimate, ModelParams, ScoreBundle, dense_to_blocks

GRAPHS = ("G1", "G2", "G3", "G4")
NOISE_MODELS = ("NM1", "NM2", "none")

# stream tags
_LATENT, _TRANSFORM, _GRAPH4, _NM2 = 1, 3, 4, 5

MAX_ATTEMPTS = 20
PD_REPAIR_MARGIN = 0.1


def rng_for(seed, *path):
    """Counter-style generator: a pure function of ``(seed, *path)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


@dataclass(frozen=True)
class NoiseSpec:
    model: str = "NM1"
    sigma: float = 0.05

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise ValueError(f"noise model must be one of {NOISE_MODELS}, got {self.model!r}")
        if self.model == "NM1" and not self.sigma > 0:
            raise ValueError(f"NM1 sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Everything needed to regenerate a simulated dataset.

    ``offdiag_scale`` multiplies the off-diagonal precision blocks of G1-G3
    (0.5 gives the halved variant used for distance experiments); ``g4_tau``
    is the shared-edge fraction of the G4 edge partition.
    """

    graph: str
    p: int
    r: int = 9
    r_m: tuple = (9, 9)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    N: int = 100
    seed: int = 0
    offdiag_scale: float = 1.0
    g4_tau: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "r_m", tuple(int(v) for v in self.r_m))
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseSpec(**self.noise))
        if self.graph not in GRAPHS:
            raise ValueError(f"graph must be one of {GRAPHS}, got {self.graph!r}")
        if self.p < 1 or self.r < 1 or self.N < 0:
            raise ValueError("p, r must be positive and N nonnegative")
        if len(self.r_m) < 1 or min(self.r_m) < self.r:
            raise ValueError(f"every r_m must be >= r={self.r}, got {self.r_m}")
        if self.graph == "G2" and self.p % 10:
            raise ValueError(f"G2 needs p to be a multiple of 10, got {self.p}")
        if self.noise.model == "NM2" and self.p % 10:
            raise ValueError(f"NM2 needs p to be a multiple of 10, got {self.p}")
        if not 0 <= self.g4_tau <= 1:
            raise ValueError("g4_tau must lie in [0, 1]")

    def to_dict(self):
        d = asdict(self)
        d["r_m"] = list(self.r_m)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseSpec(**d["noise"])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    omega: np.ndarray
    l_mats: tuple
    a_mats: tuple
    true_edges: GraphEstimate
    noise_covs: tuple
    r: int

    @property
    def p(self):
        return self.omega.shape[0] // self.r

    def b_blocks(self):
        return population_b(self.omega, self.r)

    def params(self):
        return ModelParams(self.a_mats, self.b_blocks())

    def population_covariances(self):
        """Exact covariance of the observed scores for each modality."""
        sigma_z = np.linalg.inv(self.omega)
        sigma_z = symmetrize(sigma_z)
        p = self.p
        out = []
        for l, q in zip(self.l_mats, self.noise_covs):
            big_l = np.kron(np.eye(p), l)
            out.append(symmetrize(big_l @ sigma_z @ big_l.T + q))
        return tuple(out)


def tridiag_psi(r):
    return np.eye(r) + 0.5 * (np.eye(r, k=1) + np.eye(r, k=-1))


def _banded_precision(p, r, weights, scale):
    """Block-banded precision with ``weights[d-1] * Psi`` on block offset d."""
    psi = tridiag_psi(r)
    omega = np.kron(np.eye(p), np.eye(r))
    for d, w in enumerate(weights, start=1):
        if d < p:
            band = np.eye(p, k=d) + np.eye(p, k=-d)
            omega += scale * w * np.kron(band, psi)
    return omega


def _edges_from_omega(omega, p, r):
    blocks = omega.reshape(p, r, p, r)
    nz = np.abs(blocks).sum(axis=(1, 3)) > 0
    edges = {(i, j) for i in range(p) for j in range(i + 1, p) if nz[i, j]}
    return edges


def _repair_pd(omega):
    """Diagonal loading for indefinite banded constructions (identity when already PD)."""
    lam = np.linalg.eigvalsh(omega)[0]
    if lam > 0:
        return omega
    return omega + (abs(lam) + PD_REPAIR_MARGIN) * np.eye(omega.shape[0])


def power_law_degrees(p, rng):
    """Degrees drawn from density ~ y^-2 truncated to [1, p-1] by inverse CDF, floored."""
    hi = max(p - 1, 1)
    u = rng.random(p)
    y = 1.0 / (1.0 - u * (1.0 - 1.0 / hi)) if hi > 1 else np.ones(p)
    return np.clip(np.floor(y), 1, hi).astype(int)


def power_law_edges(p, rng):
    deg = power_law_degrees(p, rng)
    edges = set()
    for i in range(p):
        others = [j for j in range(p) if j != i]
        for j in rng.choice(others, size=min(deg[i], len(others)), replace=False):
            edges.add((min(i, int(j)), max(i, int(j))))
    return sorted(edges)


def partition_edges(edges, r, tau, rng):
    """Split ``edges`` into r overlapping sets: a shared tau-fraction plus a cyclic deal-out."""
    edges = list(edges)
    n_shared = int(round(tau * len(edges)))
    idx = rng.permutation(len(edges))
    shared = [edges[t] for t in idx[:n_shared]]
    rest = [edges[t] for t in sorted(idx[n_shared:])]
    parts = [set(shared) for _ in range(r)]
    l, c = 1, 1
    for e in rest:
        parts[l - 1].add(e)
        l += 1
        if l > c:
            l = 1
            c = (c + 1) % r
    return parts


def _graph4(p, r, tau, seed):
    for attempt in range(MAX_ATTEMPTS):
        rng = rng_for(seed, _GRAPH4, attempt)
        parts = partition_edges(power_law_edges(p, rng), r, tau, rng)
        tilde = []
        ok = True
        for part in parts:
            t = np.eye(p)
            for i, j in part:
                lo, hi = min(i, j), max(i, j)
                mag = rng.uniform(1.0 / 3.0, 2.0 / 3.0)
                t[hi, lo] = mag if rng.random() < 0.5 else -mag
            t = t / np.linalg.norm(t, axis=1, keepdims=True)
            t = 0.5 * (t + t.T)
            np.fill_diagonal(t, 1.0)
            if np.linalg.eigvalsh(t)[0] <= 0:
                ok = False
                break
            tilde.append(t)
        if not ok:
            continue
        sig_diag = np.concatenate([np.diag(3.0 * (l + 1) ** -1.8 * np.linalg.inv(t))
                                   for l, t in enumerate(tilde)])
        bar = np.zeros((p * r, p * r))
        for l, t in enumerate(tilde):
            bar[l * p:(l + 1) * p, l * p:(l + 1) * p] = t
            if l + 1 < r:
                off = 0.5 * (t - np.diag(np.diag(t)) + tilde[l + 1] - np.diag(np.diag(tilde[l + 1])))
                bar[l * p:(l + 1) * p, (l + 1) * p:(l + 2) * p] = off
                bar[(l + 1) * p:(l + 2) * p, l * p:(l + 1) * p] = off.T
        bar = _repair_pd(bar)
        d_bar = 1.0 / np.sqrt(np.diag(bar))
        normed = bar * d_bar[:, None] * d_bar[None, :]
        d_sig = 1.0 / np.sqrt(sig_diag)
        omega_lp = normed * d_sig[:, None] * d_sig[None, :]
        # (latent index l, node i) ordering -> node-major (i, l)
        perm = np.array([l * p + i for i in range(p) for l in range(r)])
        omega = symmetrize(omega_lp[np.ix_(perm, perm)])
        if np.linalg.eigvalsh(omega)[0] > 0:
            return omega
    raise NotPositiveDefinite(f"G4 construction failed to be positive definite in {MAX_ATTEMPTS} attempts")


def build_precision(graph, p, r, offdiag_scale=1.0, seed=0, g4_tau=0.1):
    """Latent precision matrix (node-major, ``p r`` square) and its true edge set."""
    if graph == "G1":
        omega = _repair_pd(_banded_precision(p, r, (0.4, 0.2), offdiag_scale))
    elif graph == "G3":
        omega = _repair_pd(_banded_precision(p, r, (0.4, 0.2, 0.1), offdiag_scale))
    elif graph == "G2":
        if p % 10:
            raise ValueError(f"G2 needs p to be a multiple of 10, got {p}")
        group = _repair_pd(_banded_precision(10, r, (0.4, 0.2), offdiag_scale))
        omega = np.eye(p * r)
        for t in range(0, p // 10, 2):
            sl = slice(t * 10 * r, (t + 1) * 10 * r)
            omega[sl, sl] = group
    elif graph == "G4":
        omega = _graph4(p, r, g4_tau, seed)
    else:
        raise ValueError(f"unknown graph {graph!r}")
    edges = _edges_from_omega(omega, p, r)
    norms = np.linalg.norm(omega.reshape(p, r, p, r), axis=(1, 3))
    np.fill_diagonal(norms, 0.0)
    return omega, GraphEstimate(p, norms, frozenset(edges), "AND", 0.0)


def _sparse_orthonormal_rows(r, r_m, rng):
    n_nz = max(1, int(round(r_m / 3.0)))
    s = np.zeros((r, r_m))
    # a distinct anchor column per row keeps the sparse draw full rank
    anchors = rng.permutation(r_m)[:r]
    for i in range(r):
        rest = np.delete(np.arange(r_m), anchors[i])
        cols = np.append(anchors[i], rng.choice(rest, size=n_nz - 1, replace=False))
        s[i, cols] = rng.normal(size=n_nz)
    if np.linalg.matrix_rank(s) < r:
        raise RankDeficient("sparse row draw is rank deficient")
    q, _ = np.linalg.qr(s.T)
    rows = q.T
    # deterministic sign: largest-magnitude entry of each row positive
    piv = np.abs(rows).argmax(axis=1)
    rows *= np.sign(rows[np.arange(r), piv])[:, None]
    return rows, s


def row_scales(r):
    return 0.2 * (np.arange(1, r + 1) + 1) + 1.0


def build_transforms(r, r_m, seed):
    """Per modality ``(L, A)``: A has orthogonal sparse-drawn rows scaled by 0.2(i+1)+1, L = pinv(A)."""
    out = []
    for m, rm in enumerate(r_m):
        if rm < r:
            raise DimensionMismatch(f"r_m={rm} < r={r}")
        for attempt in range(MAX_ATTEMPTS):
            try:
                rows, _ = _sparse_orthonormal_rows(r, rm, rng_for(seed, _TRANSFORM, m, attempt))
                break
            except RankDeficient:
                continue
        else:
            raise RankDeficient(f"could not draw full-rank transform for modality {m}")
        a = row_scales(r)[:, None] * rows
        out.append((np.linalg.pinv(a), a))
    return out


def nm2_blocks(p, r_m, seed):
    """Raw orthonormal block draws for NM2: one list of blocks per modality (modality 2 rotated)."""
    size = 10 * r_m[0]
    rng = rng_for(seed, _NM2)
    base = []
    for _ in range(p // 10):
        q, rr = np.linalg.qr(rng.normal(size=(size, size)))
        base.append(q * np.sign(np.diag(rr)))
    out = [base]
    for m in range(1, len(r_m)):
        if r_m[m] != r_m[0]:
            raise DimensionMismatch("NM2 needs equal r_m across modalities")
        out.append([np.rot90(f, k=-1) for f in base] if m % 2 else list(base))
    return out


def _nm2_from_block(f):
    ft = symmetrize(f)
    w, v = np.linalg.eigh(ft)
    keep = w > 0
    # 0.01 * lam / lam_max * sigma_max, with sigma_max read as the pre-truncation lam_max
    w_new = 0.01 * w[keep]
    return symmetrize((v[:, keep] * w_new) @ v[:, keep].T)


def build_noise_cov(noise, p, r_m, seed):
    """Per-modality noise covariance of size ``p r_m``."""
    if noise.model == "none":
        return tuple(np.zeros((p * rm, p * rm)) for rm in r_m)
    if noise.model == "NM1":
        return tuple(noise.sigma * np.eye(p * rm) for rm in r_m)
    if p % 10:
        raise ValueError("NM2 needs p to be a multiple of 10")
    out = []
    for blocks in nm2_blocks(p, r_m, seed):
        cov = np.zeros((p * r_m[0], p * r_m[0]))
        for t, f in enumerate(blocks):
            sl = slice(t * f.shape[0], (t + 1) * f.shape[0])
            cov[sl, sl] = _nm2_from_block(f)
        out.append(cov)
    return tuple(out)


def population_b(omega, r):
    """Neighbourhood coefficients ``B*_ij = -Omega_ii^{-1} Omega_ij`` as a ``(p, r, r(p-1))`` stack."""
    omega = np.asarray(omega, dtype=float)
    if np.linalg.eigvalsh(symmetrize(omega))[0] <= 0:
        raise NotPositiveDefinite("precision matrix is not positive definite")
    p = omega.shape[0] // r
    blocks = omega.reshape(p, r, p, r).transpose(0, 2, 1, 3)
    dense = np.zeros_like(blocks)
    for i in range(p):
        inv_ii = np.linalg.inv(blocks[i, i])
        for j in range(p):
            if j != i:
                dense[i, j] = -inv_ii @ blocks[i, j]
    return dense_to_blocks(dense)


def _cholesky_factor(cov):
    cov = symmetrize(cov)
    w, v = np.linalg.eigh(cov)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def ground_truth(spec):
    omega, edges = build_precision(spec.graph, spec.p, spec.r, spec.offdiag_scale, spec.seed, spec.g4_tau)
    transforms = build_transforms(spec.r, spec.r_m, spec.seed)
    noise = build_noise_cov(spec.noise, spec.p, spec.r_m, spec.seed)
    return GroundTruth(omega, tuple(l for l, _ in transforms), tuple(a for _, a in transforms),
                       edges, noise, spec.r)


def simulate(spec, truth=None):
    """Draw the score bundle for ``spec``; sample n uses only ``(seed, n)`` randomness."""
    truth = ground_truth(spec) if truth is None else truth
    p, r = spec.p, spec.r
    sigma_z = symmetrize(np.linalg.inv(truth.omega))
    fz = _cholesky_factor(sigma_z)
    fq = [None if not q.any() else _cholesky_factor(q) for q in truth.noise_covs]
    dims = [p * rm for rm in spec.r_m]
    total = p * r + sum(dims)
    scores = [np.empty((d, spec.N)) for d in dims]
    # one matrix-vector product per sample keeps column n independent of N bit for bit
    for n in range(spec.N):
        draw = rng_for(spec.seed, _LATENT, n).standard_normal(total)
        z = fz @ draw[:p * r]
        off = p * r
        for m, l in enumerate(truth.l_mats):
            x = (z.reshape(p, r) @ l.T).reshape(-1)
            if fq[m] is not None:
                x = x + fq[m] @ draw[off:off + dims[m]]
            off += dims[m]
            scores[m][:, n] = x
    return ScoreBundle(p, tuple(scores)), truth
