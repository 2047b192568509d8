import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from subsplit.tensor import (AmbiguityError, DimensionError, RngState, frobenius_sq, gather_rows,
                             matmul, scatter_rows)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def triple_loop(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def test_matmul_identity_and_small():
    A = [[1.0, 2.0], [3.0, 4.0]]
    assert np.array_equal(matmul(np.eye(2), A), A)
    assert np.array_equal(matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 3))
    np.testing.assert_allclose(matmul(a, b), triple_loop(a, b), rtol=0, atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_matmul_associative(m, k, l, n, seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(m, k)), rng.normal(size=(k, l)), rng.normal(size=(l, n))
    left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
    assert np.linalg.norm(left - right) <= 1e-9 * max(1.0, np.linalg.norm(left))


def test_gather_examples():
    x = np.array([[1.0], [2.0], [3.0]])
    assert np.array_equal(gather_rows(x, [0]), [[1.0]])
    assert np.array_equal(gather_rows(x, [2, 0]), [[3.0], [1.0]])
    with pytest.raises(IndexError):
        gather_rows(x, [3])


def test_scatter_examples():
    x = np.array([[1.0], [2.0], [3.0]])
    assert np.array_equal(scatter_rows(x, [1], [[9.0]]), [[1.0], [9.0], [3.0]])
    assert np.array_equal(scatter_rows(x, [], np.empty((0, 1))), x)
    assert np.array_equal(x, [[1.0], [2.0], [3.0]])  # input untouched
    with pytest.raises(AmbiguityError):
        scatter_rows(x, [1, 1], [[0.0], [0.0]])
    with pytest.raises(IndexError):
        scatter_rows(x, [-1], [[0.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 4)), elements=finite), st.data())
def test_gather_scatter_round_trip(x, data):
    idx = data.draw(st.lists(st.integers(0, x.shape[0] - 1), unique=True))
    assert np.array_equal(scatter_rows(x, idx, gather_rows(x, idx)), x)
    y = scatter_rows(np.zeros_like(x), idx, gather_rows(x, idx))
    assert np.array_equal(gather_rows(y, idx), gather_rows(x, idx))


def test_frobenius():
    assert frobenius_sq(np.zeros((3, 2))) == 0.0
    assert frobenius_sq([3.0, 4.0]) == 25.0
    x = np.random.default_rng(1).normal(size=(6, 5))
    assert abs(frobenius_sq(x) - sum(v * v for v in x.ravel())) < 1e-12


def test_rng_reproducible():
    a, b = RngState(42), RngState(42)
    da = [a.uniform(0, 1) for _ in range(1000)]
    db = [b.uniform(0, 1) for _ in range(1000)]
    assert da == db
    assert a.position == 1000
    assert RngState(43).uniform(0, 1) != da[0]


def test_rng_spawn_is_deterministic_and_distinct():
    r = RngState(7)
    assert r.spawn(1).seed == RngState(7).spawn(1).seed
    assert r.spawn(1).seed != r.spawn(2).seed
