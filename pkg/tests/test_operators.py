import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from latentgraph.errors import BoundsInfeasible
from latentgraph.model import b_from_matrix, b_matrix
from latentgraph.operators import (block_norms, clamp_rows, hard_threshold_rc, project_dense,
                                   project_group_sparse, project_row_norms, truncate_group_sparse)

finite = st.floats(-10, 10, allow_nan=False, width=64)


def blocks_with_norms(norms, k=2):
    return np.hstack([np.full((k, k), v / k) for v in norms])


def brute_h(b, alpha):
    k = b.shape[0]
    t = math.floor(alpha * k + 1e-12)
    out = np.zeros_like(b)
    mag = np.abs(b)
    for u in range(k):
        for v in range(k):
            # rank with ties to the lower index
            row_rank = sum(mag[u, w] > mag[u, v] or (mag[u, w] == mag[u, v] and w < v) for w in range(k))
            col_rank = sum(mag[w, v] > mag[u, v] or (mag[w, v] == mag[u, v] and w < u) for w in range(k))
            if row_rank < t and col_rank < t:
                out[u, v] = b[u, v]
    return out


def test_truncate_examples():
    b = blocks_with_norms([3, 1, 2])
    out = truncate_group_sparse(b, 2)
    np.testing.assert_allclose(block_norms(out), [3, 0, 2])
    np.testing.assert_array_equal(truncate_group_sparse(b, 3), b)
    tie = truncate_group_sparse(blocks_with_norms([1, 1, 1]), 1)
    np.testing.assert_allclose(block_norms(tie), [1, 0, 0])


def test_hard_threshold_examples(rng):
    b = np.array([[5.0, 1, 0], [0, 4, 2], [3, 0, 6]])
    np.testing.assert_array_equal(hard_threshold_rc(b, 1 / 3), np.diag([5.0, 4, 6]))
    np.testing.assert_array_equal(hard_threshold_rc(b, 1.0), b)
    for _ in range(50):
        x = rng.standard_normal((4, 4))
        np.testing.assert_array_equal(hard_threshold_rc(x, 0.5), brute_h(x, 0.5))


def test_hard_threshold_row_top_not_column_top():
    b = np.array([[2.0, 1.0], [3.0, 0.5]])
    # row 0's top entry (0,0) is not the top of column 0
    out = hard_threshold_rc(b, 0.5)
    assert out[0, 0] == 0.0 and out[1, 0] == 3.0


def test_row_norm_examples(rng):
    a = np.array([[1.0, 0.0], [0.0, 1.5]])
    np.testing.assert_array_equal(project_row_norms(a, 1.0, 4.0, 1.0, 2.0, 2), a)
    lo, hi = 1.0, math.sqrt(4.0 / 2) * 2.0
    big = np.array([[2 * hi, 0.0], [1.2, 0.0]])
    out = project_row_norms(big, 1.0, 4.0, 1.0, 2.0, 2)
    assert abs(np.linalg.norm(out[0]) - hi) < 1e-12
    zero = project_row_norms(np.zeros((1, 3)), 1.0, 4.0, 1.0, 2.0, 3)
    np.testing.assert_array_equal(zero, [[lo, 0.0, 0.0]])
    with pytest.raises(BoundsInfeasible):
        project_row_norms(a, 4.0, 4.0, 2.0, 1.0, 2)


@given(st.integers(1, 4), st.integers(2, 6), st.integers(0, 2 ** 32 - 1), st.data())
def test_truncate_invariants(k, p, seed, data):
    s = data.draw(st.integers(1, p - 1))
    b = np.random.default_rng(seed).standard_normal((k, k * (p - 1)))
    out = truncate_group_sparse(b, s)
    norms = block_norms(out)
    assert (norms > 0).sum() <= s
    kept = norms > 0
    split_in = b.reshape(k, p - 1, k).swapaxes(0, 1)
    split_out = out.reshape(k, p - 1, k).swapaxes(0, 1)
    np.testing.assert_array_equal(split_out[kept], split_in[kept])
    np.testing.assert_array_equal(truncate_group_sparse(out, s), out)


@given(arrays(np.float64, st.tuples(st.integers(1, 5)).map(lambda t: (t[0], t[0])), elements=finite),
       st.floats(0.01, 1.0))
def test_hard_threshold_invariants(b, alpha):
    k = b.shape[0]
    t = math.floor(alpha * k + 1e-12)
    if t < 1:
        return
    out = hard_threshold_rc(b, alpha)
    nz = out != 0
    assert nz.sum(axis=0).max() <= t and nz.sum(axis=1).max() <= t
    np.testing.assert_array_equal(hard_threshold_rc(out, alpha), out)
    np.testing.assert_array_equal(out, brute_h(b, alpha))


@given(st.integers(1, 5), st.integers(1, 6), st.floats(0.1, 2.0), st.floats(0.1, 3.0),
       st.integers(0, 2 ** 32 - 1))
def test_row_norm_invariants(k, km, lo, width, seed):
    hi = lo + width
    a = np.random.default_rng(seed).standard_normal((k, km)) * 3
    out = clamp_rows(a, lo, hi)
    norms = np.linalg.norm(out, axis=1)
    assert np.all(norms >= lo - 1e-12) and np.all(norms <= hi + 1e-12)
    np.testing.assert_allclose(clamp_rows(out, lo, hi), out, rtol=1e-14, atol=0)
    # per-row 1-D oracle: the clamp of each norm along the same direction is nearest
    for r in range(k):
        nr = np.linalg.norm(a[r])
        expect = a[r] * (min(max(nr, lo), hi) / nr)
        np.testing.assert_allclose(out[r], expect, rtol=1e-12, atol=1e-15)


@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2 ** 32 - 1), st.data())
def test_dense_projection_matches_stacked(p, k, seed, data):
    s = data.draw(st.integers(1, p - 1))
    alpha = data.draw(st.sampled_from([1.0, 0.5, 1 / 3]))
    if math.floor(alpha * k + 1e-12) < 1:
        return
    b = np.random.default_rng(seed).standard_normal((p, k, k * (p - 1)))
    dense = project_dense(b_matrix(b), p, s, alpha)
    np.testing.assert_array_equal(b_from_matrix(dense, p), project_group_sparse(b, s, alpha))
