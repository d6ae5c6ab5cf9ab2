from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgvar.errors import DimensionMismatchError, InvalidParameterError
from pgvar.filtering import (
    apply_poly_filter,
    apply_product_filter,
    apply_product_shift_filter,
    apply_shift,
    count_multiply_adds,
    poly_stack,
    product_stack,
)
from pgvar.graph import Graph, edgeless_graph, make_product, path_graph
from pgvar.shift import shift_features, shift_nodes

from conftest import random_dense, random_graph

mp = np.linalg.matrix_power


def test_shift_matches_dense(backend, rng):
    g, S = random_graph(rng, 7)
    x = rng.normal(size=7)
    np.testing.assert_allclose(apply_shift(g, x), S @ x, atol=1e-14)


def test_node_and_feature_shift_against_kron(backend, rng):
    g, S = random_graph(rng, 4)
    gf, SF = random_graph(rng, 3)
    x = rng.normal(size=(5, 12))
    np.testing.assert_allclose(shift_nodes(g, x, 3), x @ np.kron(S, np.eye(3)).T, atol=1e-14)
    np.testing.assert_allclose(shift_features(gf, x, 4), x @ np.kron(np.eye(4), SF).T, atol=1e-14)


def test_poly_filter_against_dense(backend, rng):
    g, S = random_graph(rng, 6)
    h = rng.normal(size=4)
    x = rng.normal(size=12)
    H = sum(h[k] * np.kron(mp(S, k), np.eye(2)) for k in range(4))
    np.testing.assert_allclose(apply_poly_filter(g, h, x, 2), H @ x, atol=1e-12)
    st_ = poly_stack(g, x, 3, 2)
    for k in range(4):
        np.testing.assert_allclose(st_[k], np.kron(mp(S, k), np.eye(2)) @ x, atol=1e-12)


def test_product_stack_against_dense(backend, rng):
    g, S = random_graph(rng, 5)
    gf, SF = random_graph(rng, 3)
    x = rng.normal(size=(2, 15))
    stack = product_stack(g, gf, x, 2, 3)
    for k in range(3):
        for l in range(4):
            np.testing.assert_allclose(stack[k, l], x @ np.kron(mp(S, k), mp(SF, l)).T, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(0, 3))
@settings(max_examples=50, deadline=None)
def test_linearity(seed, k):
    rng = np.random.default_rng(seed)
    g, _ = random_graph(rng, 5)
    gf, _ = random_graph(rng, 2)
    h = rng.normal(size=(k + 1, 2))
    x, y = rng.normal(size=(2, 10))
    a, b = rng.normal(size=2)
    lhs = apply_product_filter(g, gf, h, a * x + b * y)
    rhs = a * apply_product_filter(g, gf, h, x) + b * apply_product_filter(g, gf, h, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


def test_poly_count_is_K_edges(backend, rng):
    g, _ = random_graph(rng, 9, density=0.3)
    with count_multiply_adds() as c:
        apply_poly_filter(g, rng.normal(size=5), rng.normal(size=9))
    assert c.value == 4 * g.n_edges


def test_product_filter_count(backend, rng):
    g, _ = random_graph(rng, 6)
    gf, _ = random_graph(rng, 3)
    K, L = 3, 2
    with count_multiply_adds() as c:
        apply_product_filter(g, gf, rng.normal(size=(K + 1, L + 1)), rng.normal(size=18))
    assert c.value == L * 6 * gf.n_edges + (L + 1) * K * 3 * g.n_edges


def test_batch_counts_scale(backend, rng):
    g, _ = random_graph(rng, 6)
    with count_multiply_adds() as c:
        apply_poly_filter(g, [0.0, 1.0], rng.normal(size=(7, 6)))
    assert c.value == 7 * g.n_edges


def test_counter_nesting_is_isolated(rng):
    g, _ = random_graph(rng, 4)
    with count_multiply_adds() as outer:
        apply_shift(g, np.ones(4))
        with count_multiply_adds() as inner:
            apply_shift(g, np.ones(4))
        apply_shift(g, np.ones(4))
    assert inner.value == g.n_edges
    assert outer.value == 2 * g.n_edges


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_cartesian_power_expands_binomially(backend, rng, K):
    """(S kron I + I kron S_F)^K = sum_j C(K, j) S^(K-j) kron S_F^j."""
    g, _ = random_graph(rng, 5, symmetric=True)
    gf, _ = random_graph(rng, 3, symmetric=True)
    op = make_product(g, gf, "cartesian")
    x = rng.normal(size=15)
    h = np.zeros(K + 1)
    h[K] = 1.0
    hb = np.zeros((K + 1, K + 1))
    for j in range(K + 1):
        hb[K - j, j] = comb(K, j)
    np.testing.assert_allclose(
        apply_product_shift_filter(op, h, x), apply_product_filter(g, gf, hb, x), atol=1e-11
    )


def test_zero_coefficients_give_zero(rng):
    g, _ = random_graph(rng, 4)
    gf, _ = random_graph(rng, 2)
    assert not apply_product_filter(g, gf, np.zeros((3, 2)), rng.normal(size=8)).any()


def test_identity_filter(rng):
    g, _ = random_graph(rng, 4)
    x = rng.normal(size=8)
    np.testing.assert_array_equal(apply_product_filter(g, edgeless_graph(2), [[1.0]], x), x)


def test_errors():
    g = path_graph(3)
    with pytest.raises(DimensionMismatchError):
        apply_poly_filter(g, [1.0, 1.0], np.ones(4))
    with pytest.raises(InvalidParameterError):
        apply_poly_filter(g, [], np.ones(3))
    with pytest.raises(InvalidParameterError):
        apply_product_filter(g, g, [1.0, 2.0], np.ones(9))
    with pytest.raises(InvalidParameterError):
        apply_poly_filter(g, [1.0, np.inf], np.ones(3))
