"""Core value types: basis dimensions, score bundles, parameters, configs, graphs.

Layout conventions (0-based throughout):

* Modality ``m`` scores are a ``(p * k_m, N)`` matrix; node ``i`` owns rows
  ``[i * k_m, (i + 1) * k_m)``.
* Node ``i``'s neighbourhood matrix ``B_i`` is ``(k, k * (p - 1))``; the
  neighbours ``0..i-1, i+1..p-1`` occupy consecutive ``k``-column blocks in
  that order. The diagonal block ``B_ii = I`` is implicit and never stored.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import DimensionMismatch

EDGE_RULES = ("AND", "OR")


@dataclass(frozen=True)
class BasisDims:
    p: int
    k: int
    k_m: tuple

    def __post_init__(self):
        object.__setattr__(self, "k_m", tuple(int(v) for v in self.k_m))
        if self.p < 1:
            raise DimensionMismatch(f"p must be >= 1, got {self.p}")
        if self.k < 1:
            raise DimensionMismatch(f"k must be >= 1, got {self.k}")
        if len(self.k_m) < 1:
            raise DimensionMismatch("need at least one modality")
        if min(self.k_m) < self.k:
            raise DimensionMismatch(f"min(k_m)={min(self.k_m)} < k={self.k}")

    @property
    def M(self):
        return len(self.k_m)


@dataclass(frozen=True)
class ScoreBundle:
    """Per-modality basis scores sharing one node count and sample count."""

    p: int
    scores: tuple

    def __post_init__(self):
        scores = tuple(np.asarray(y, dtype=float) for y in self.scores)
        if not scores:
            raise DimensionMismatch("ScoreBundle needs at least one modality")
        n = scores[0].shape[1]
        for m, y in enumerate(scores):
            if y.ndim != 2:
                raise DimensionMismatch(f"modality {m}: expected 2-D scores, got {y.ndim}-D")
            if y.shape[1] != n:
                raise DimensionMismatch(f"modality {m}: N={y.shape[1]} differs from N={n}")
            if y.shape[0] % self.p:
                raise DimensionMismatch(f"modality {m}: {y.shape[0]} rows not divisible by p={self.p}")
        object.__setattr__(self, "scores", scores)

    @property
    def M(self):
        return len(self.scores)

    @property
    def N(self):
        return self.scores[0].shape[1]

    @property
    def k_m(self):
        return tuple(y.shape[0] // self.p for y in self.scores)

    def node(self, m, i):
        km = self.k_m[m]
        return self.scores[m][i * km:(i + 1) * km]

    def subset(self, columns):
        """Bundle restricted to the given sample indices."""
        columns = np.asarray(columns)
        return ScoreBundle(self.p, tuple(y[:, columns] for y in self.scores))

    def covariances(self):
        """Uncentered per-modality covariances ``Y Y^T / N``."""
        n = self.N
        return tuple(0.5 * (c + c.T) for c in (y @ y.T / n for y in self.scores))


def neighbors(p, i):
    """Neighbour order used for the columns of ``B_i``."""
    return [j for j in range(p) if j != i]


def neighbor_position(i, j):
    if i == j:
        raise ValueError("a node is not its own neighbour")
    return j if j < i else j - 1


def flatten_b(blocks):
    """Stack ``p - 1`` k-by-k blocks side by side into ``(k, k * (p - 1))``."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    if not blocks:
        raise DimensionMismatch("need at least one neighbour block")
    k = blocks[0].shape[0]
    for b in blocks:
        if b.shape != (k, k):
            raise DimensionMismatch(f"block shape {b.shape} != ({k}, {k})")
    return np.hstack(blocks)


def unflatten_b(b, k):
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != k or b.shape[1] % k:
        raise DimensionMismatch(f"cannot split shape {b.shape} into {k}x{k} blocks")
    return [b[:, c:c + k] for c in range(0, b.shape[1], k)]


def b_tilde(b_i, i):
    """``(k, k * p)`` matrix with ``-B_ij`` at block j and ``+I`` at block i."""
    b_i = np.asarray(b_i, dtype=float)
    k = b_i.shape[0]
    left = -b_i[:, :i * k]
    right = -b_i[:, i * k:]
    return np.hstack([left, np.eye(k), right])


def _neighbor_index(p):
    # row i lists the neighbours of node i in storage order
    return np.array([neighbors(p, i) for i in range(p)], dtype=int).reshape(p, p - 1)


def blocks_to_dense(b):
    """``(p, k, k(p-1))`` neighbourhood stack -> ``(p, p, k, k)`` with zero diagonal."""
    p, k = b.shape[0], b.shape[1]
    out = np.zeros((p, p, k, k))
    if p == 1:
        return out
    bb = b.reshape(p, k, p - 1, k).transpose(0, 2, 1, 3)
    out[np.arange(p)[:, None], _neighbor_index(p)] = bb
    return out


def dense_to_blocks(d):
    """Inverse of :func:`blocks_to_dense`; diagonal blocks are dropped."""
    p, k = d.shape[0], d.shape[2]
    if p == 1:
        return np.zeros((1, k, 0))
    out = d[np.arange(p)[:, None], _neighbor_index(p)]
    return out.transpose(0, 2, 1, 3).reshape(p, k, k * (p - 1))


def b_matrix(b):
    """The ``(pk, pk)`` matrix ``[B_ij]`` with zero diagonal blocks."""
    p, k = b.shape[0], b.shape[1]
    return blocks_to_dense(b).transpose(0, 2, 1, 3).reshape(p * k, p * k)


def b_from_matrix(mat, p):
    """Inverse of :func:`b_matrix`."""
    k = mat.shape[0] // p
    return dense_to_blocks(mat.reshape(p, k, p, k).transpose(0, 2, 1, 3))


def b_tilde_full(b):
    """All ``B~_i`` stacked: the ``(pk, pk)`` matrix ``I - [B_ij]``."""
    p, k = b.shape[0], b.shape[1]
    return np.eye(p * k) - b_matrix(b)


@dataclass(frozen=True)
class ModelParams:
    """Transformation matrices ``A^m`` (k, k_m) and neighbourhood stack ``b`` (p, k, k(p-1))."""

    a_mats: tuple
    b: np.ndarray

    def __post_init__(self):
        a = tuple(np.asarray(x, dtype=float) for x in self.a_mats)
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 3:
            raise DimensionMismatch(f"b must be 3-D (p, k, k(p-1)), got {b.shape}")
        p, k = b.shape[0], b.shape[1]
        if b.shape[2] != k * (p - 1):
            raise DimensionMismatch(f"b has {b.shape[2]} columns, expected {k * (p - 1)}")
        for m, am in enumerate(a):
            if am.ndim != 2 or am.shape[0] != k:
                raise DimensionMismatch(f"A^{m} has shape {am.shape}, expected ({k}, k_m)")
        object.__setattr__(self, "a_mats", a)
        object.__setattr__(self, "b", b)

    @property
    def p(self):
        return self.b.shape[0]

    @property
    def k(self):
        return self.b.shape[1]

    @property
    def M(self):
        return len(self.a_mats)

    @property
    def k_m(self):
        return tuple(a.shape[1] for a in self.a_mats)

    def block(self, i, j):
        c = neighbor_position(i, j) * self.k
        return self.b[i][:, c:c + self.k]

    def dense_blocks(self):
        return blocks_to_dense(self.b)

    def check_against(self, data):
        if data.p != self.p:
            raise DimensionMismatch(f"data has p={data.p}, params have p={self.p}")
        if data.M != self.M:
            raise DimensionMismatch(f"data has M={data.M}, params have M={self.M}")
        if data.k_m != self.k_m:
            raise DimensionMismatch(f"data k_m={data.k_m} vs params k_m={self.k_m}")

    @classmethod
    def zeros_b(cls, a_mats, p):
        k = np.asarray(a_mats[0]).shape[0]
        return cls(tuple(a_mats), np.zeros((p, k, k * (p - 1))))


@dataclass(frozen=True)
class FitConfig:
    """Tuning parameters for initialization and the alternating solver.

    ``eta_b0=None`` selects the Lipschitz step ``1 / max_m(sigma_max(A^m)^2 ||S^m||_2)``.
    """

    s: int
    alpha: float = 1.0
    tau1: float = 0.5
    tau2: float = 16.0
    eta_a: float = 1e-4
    eta_b: float = 1e-3
    eta_b0: float = None
    max_iter_main: int = 2000
    max_iter_init: int = 500
    tol: float = 1e-6
    eps0: float = 1e-3
    edge_rule: str = "AND"

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be a positive integer, got {self.s}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("tau1 and tau2 must be positive")
        if self.tau1 > self.tau2:
            raise ValueError(f"tau1={self.tau1} exceeds tau2={self.tau2}")
        for name in ("eta_a", "eta_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.eta_b0 is not None and self.eta_b0 <= 0:
            raise ValueError("eta_b0 must be positive or None")
        if self.max_iter_main < 1 or self.max_iter_init < 1:
            raise ValueError("iteration caps must be positive")
        if self.tol < 0 or self.eps0 < 0:
            raise ValueError("tol and eps0 must be nonnegative")
        if self.edge_rule not in EDGE_RULES:
            raise ValueError(f"edge_rule must be one of {EDGE_RULES}, got {self.edge_rule!r}")
        object.__setattr__(self, "s", int(self.s))

    def kept_per_line(self, k):
        return math.floor(self.alpha * k + 1e-12)

    def validate_for(self, p, k):
        if self.s > max(p - 1, 1):
            raise ValueError(f"s={self.s} exceeds p-1={p - 1}")
        if self.kept_per_line(k) < 1:
            raise ValueError(f"floor(alpha*k) = 0 for alpha={self.alpha}, k={k}")

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class GraphEstimate:
    """Undirected edge set plus the per-direction block norms it was read from.

    ``block_norms[i, j]`` is ``||B_ij||_F`` (row i regresses on column j).
    """

    p: int
    block_norms: np.ndarray = field(repr=False)
    edges: frozenset
    rule: str = "AND"
    eps0: float = 0.0

    def __post_init__(self):
        edges = frozenset((min(i, j), max(i, j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "block_norms", np.asarray(self.block_norms, dtype=float))

    def degree(self, i):
        return sum(1 for e in self.edges if i in e)

    def adjacency(self):
        adj = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    @classmethod
    def from_edges(cls, p, edges):
        norms = np.zeros((p, p))
        for i, j in edges:
            norms[i, j] = norms[j, i] = 1.0
        return cls(p, norms, frozenset(edges), "AND", 0.0)
