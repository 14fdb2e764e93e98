import itertools
import math

import numpy as np
import pytest

from conftest import engine_pairs, random_symmetric
from oracle import oracle_barcode

from ripsph.core import DistanceInput, IndexOverflow, KTooLarge, validate_input
from ripsph.filtration import (
    FiltrationContext,
    SimplexRank,
    binomial_table,
    cofacet_enumerator,
    diameter,
    dtm_weights,
    enclosing_radius,
    facet_enumerator,
    mixed_edge_value,
    rank_simplex,
    sorted_edges,
    unrank_simplex,
    weighted_dense_matrix,
    weighted_graph,
)

INF = math.inf


def make_ctx(matrix, threshold=INF, modulus=2, max_dim=3):
    data = validate_input(DistanceInput.dense(np.asarray(matrix, dtype=float)))
    binom = binomial_table(data.n, max_dim)
    inv = [0, 1] if modulus == 2 else [0] + [pow(a, modulus - 2, modulus) for a in range(1, modulus)]
    return FiltrationContext.from_input(data, binom, threshold, modulus, tuple(inv))


# --- binomial table -------------------------------------------------------

def test_binomial_values():
    b = binomial_table(8, 3)
    assert b(5, 2) == 10
    assert b(4, 5) == 0
    assert b(0, 0) == 1
    for n in range(9):
        for k in range(1, 6):
            assert b(n, k) == math.comb(n, k)


def test_binomial_overflow_guard():
    with pytest.raises(IndexOverflow):
        binomial_table(10_000, 7)


# --- rank / unrank --------------------------------------------------------

def test_rank_examples():
    b = binomial_table(8, 3)
    assert rank_simplex((2, 1, 0), b) == SimplexRank(0, 2)
    assert rank_simplex((3, 1, 0), b) == SimplexRank(1, 2)
    assert rank_simplex((5, 2), b) == SimplexRank(12, 1)


def test_unrank_examples():
    b = binomial_table(8, 3)
    assert unrank_simplex(SimplexRank(0, 2), 8, b) == (2, 1, 0)
    assert unrank_simplex(SimplexRank(12, 1), 6, b) == (5, 2)


def test_rank_unrank_roundtrip_exhaustive():
    # all simplices of dims 0..3 on 8 vertices, plus the stated 2-simplex loop
    b = binomial_table(8, 3)
    for d in range(4):
        for comb in itertools.combinations(range(8), d + 1):
            vs = tuple(reversed(comb))
            r = rank_simplex(vs, b)
            assert unrank_simplex(r, 8, b) == vs
    count = sum(1 for _ in itertools.combinations(range(7), 3))
    assert count == 35
    for index in range(math.comb(7, 3)):
        vs = unrank_simplex(SimplexRank(index, 2), 7, b)
        assert rank_simplex(vs, b).index == index


# --- diameter / enclosing radius ------------------------------------------

TRIANGLE = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]


def test_diameter_examples():
    data = validate_input(DistanceInput.dense(TRIANGLE))
    assert diameter([0, 1, 2], data) == 2
    weighted = validate_input(DistanceInput.dense([[0.5, 1], [1, 0]]))
    assert diameter([0], weighted) == 0.5
    sparse = validate_input(DistanceInput.sparse(3, [(1, 2, 1.0)]))
    assert diameter([0, 1], sparse) == INF


def test_enclosing_radius_examples():
    data = validate_input(DistanceInput.dense(TRIANGLE))
    assert enclosing_radius(data) == 1
    assert enclosing_radius(DistanceInput.dense([[0.0]])) == 0
    rng = np.random.default_rng(11)
    for _ in range(5):
        m = random_symmetric(rng, 6)
        r = enclosing_radius(DistanceInput.dense(m))
        assert r <= m.max()


def test_enclosing_radius_zero_iff_degenerate():
    assert enclosing_radius(DistanceInput.dense([[0.0]])) == 0
    allzero = DistanceInput.dense(np.zeros((4, 4)))
    assert enclosing_radius(allzero) == 0
    rng = np.random.default_rng(2)
    m = random_symmetric(rng, 5) + 0.01
    np.fill_diagonal(m, 0.0)
    assert enclosing_radius(validate_input(DistanceInput.dense(m))) > 0


def test_radius_threshold_preserves_barcode():
    # cone property at the level of the barcode, oracle-checked
    rng = np.random.default_rng(23)
    for _ in range(6):
        m = random_symmetric(rng, 8)
        r = float(np.min(np.max(m, axis=1)))
        full = oracle_barcode(m.tolist(), 2, INF)
        cut = oracle_barcode(m.tolist(), 2, r)
        assert full == cut
        assert engine_pairs(m, max_dim=2, threshold=r, backend="python") == full


# --- enumerators ----------------------------------------------------------

def test_cofacet_order_example():
    data = validate_input(DistanceInput.dense(np.zeros((4, 4))))
    b = binomial_table(4, 2)
    edge = rank_simplex((1, 0), b)
    cofs = list(cofacet_enumerator(edge, data, binom=b))
    got = [unrank_simplex(r, 4, b) for r, _ in cofs]
    assert got == [(3, 1, 0), (2, 1, 0)]


def test_cofacet_early_stop_under_threshold():
    data = validate_input(DistanceInput.dense(TRIANGLE))
    b = binomial_table(3, 2)
    edge = rank_simplex((1, 0), b)
    assert list(cofacet_enumerator(edge, data, threshold=0.5, binom=b)) == []


def test_cofacet_diameter_on_unit_square():
    square = [
        [0, 1, math.sqrt(2), 1],
        [1, 0, 1, math.sqrt(2)],
        [math.sqrt(2), 1, 0, 1],
        [1, math.sqrt(2), 1, 0],
    ]
    data = validate_input(DistanceInput.dense(square))
    b = binomial_table(4, 2)
    edge = rank_simplex((1, 0), b)
    diams = sorted(d for _, d in cofacet_enumerator(edge, data, binom=b))
    assert diams == [math.sqrt(2), math.sqrt(2)]


def test_facet_example():
    b = binomial_table(4, 3)
    tri = rank_simplex((2, 1, 0), b)
    facets = [unrank_simplex(r, 3, b) for r in facet_enumerator(tri, 3, b)]
    assert facets == [(1, 0), (2, 0), (2, 1)]
    assert list(facet_enumerator(SimplexRank(2, 0), 4, b)) == []


def test_facet_cofacet_roundtrip():
    rng = np.random.default_rng(5)
    m = random_symmetric(rng, 6)
    data = validate_input(DistanceInput.dense(m))
    b = binomial_table(6, 3)
    for d in range(1, 4):
        for comb in itertools.combinations(range(6), d + 1):
            parent = rank_simplex(tuple(reversed(comb)), b)
            for facet in facet_enumerator(parent, 6, b):
                cofs = [r for r, _ in cofacet_enumerator(facet, data, binom=b)]
                assert parent in cofs


def test_cofacet_facet_diameter_monotone():
    rng = np.random.default_rng(17)
    m = random_symmetric(rng, 7)
    data = validate_input(DistanceInput.dense(m))
    ctx = make_ctx(m)
    b = ctx.binom
    for d in range(0, 3):
        for comb in itertools.combinations(range(7), d + 1):
            vs = tuple(reversed(comb))
            rank = rank_simplex(vs, b).index
            diam = ctx.simplex_diameter(rank, d)
            for _, cdiam, _ in ctx.cofacets_signed(rank, d, diam):
                assert cdiam >= diam
            for _, fdiam, _ in ctx.facets_with_diam(rank, d):
                assert fdiam <= diam


# --- sorted edges ---------------------------------------------------------

def test_sorted_edges_examples():
    data = validate_input(DistanceInput.dense(TRIANGLE))
    assert [e.weight for e in sorted_edges(data)] == [1, 1, 2]
    assert [e.weight for e in sorted_edges(data, threshold=1.5)] == [1, 1]
    # weight-1 tie: rank((2,1)) = 2 > rank((1,0)) = 1, so (2,1) comes first
    first, second = sorted_edges(data)[:2]
    assert (first.u, first.v) == (1, 2)
    assert (second.u, second.v) == (0, 1)


# --- DTM weights ----------------------------------------------------------

COLLINEAR = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]


def test_dtm_weights_examples():
    data = validate_input(DistanceInput.dense(COLLINEAR))
    assert dtm_weights(data, 1, 2.0) == [1, 1, 1]
    w = dtm_weights(data, 2, 2.0)
    assert w == pytest.approx([math.sqrt(5 / 2), 1.0, math.sqrt(5 / 2)], abs=0)
    dup = validate_input(DistanceInput.dense([[0, 0, 1], [0, 0, 1], [1, 1, 0]]))
    assert dtm_weights(dup, 1, 2.0)[0] == 0.0
    with pytest.raises(KTooLarge):
        dtm_weights(data, 3, 2.0)


# --- weighted filtration ---------------------------------------------------

def test_mixed_edge_value_vr_zero_weights_reduce_to_classic():
    for p_mix in (1, 2, INF):
        for d in (0.25, 1.0, 3.5):
            assert mixed_edge_value(0.0, 0.0, d, p_mix, "vr") == pytest.approx(d, abs=1e-15)


def test_mixed_edge_value_strict_formulas():
    # equal weights, p=1: t = w + d/2
    assert mixed_edge_value(0.7, 0.7, 1.0, 1, "strict") == pytest.approx(1.2)
    # dominated regime, p=1: d < |w_i - w_j| gives max(w_i, w_j)
    assert mixed_edge_value(2.0, 0.5, 1.0, 1, "strict") == 2.0
    # strict infinity rule uses d/2
    assert mixed_edge_value(0.0, 0.0, 3.0, INF, "strict") == 1.5


def test_weighted_graph_invariant_and_errors():
    rng = np.random.default_rng(3)
    m = random_symmetric(rng, 6)
    data = validate_input(DistanceInput.dense(m))
    weights = rng.random(6).tolist()
    for p_mix in (1, 2, INF):
        g = weighted_graph(data, weights, p_mix)
        for u, v, w in g.edges:
            assert w >= max(g.vertex_births[u], g.vertex_births[v])
    from ripsph.core import UnsupportedMixExponent
    with pytest.raises(UnsupportedMixExponent):
        weighted_graph(data, weights, 3)


def test_zero_weights_reproduce_unweighted_barcode():
    rng = np.random.default_rng(41)
    m = random_symmetric(rng, 7)
    base = engine_pairs(m, max_dim=2, threshold=INF, backend="python")
    for p_mix in (1, 2, INF):
        data = validate_input(DistanceInput.dense(m))
        weighted = weighted_dense_matrix(data, [0.0] * 7, p_mix)
        assert engine_pairs(weighted.values, max_dim=2, threshold=INF,
                            backend="python") == base
