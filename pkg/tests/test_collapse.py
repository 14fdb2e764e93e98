import math

import numpy as np

from conftest import random_symmetric
from oracle import oracle_barcode, sparse_to_matrix

from ripsph.collapse import NeighborhoodIndex, collapse, is_dominated
from ripsph.core import DistanceInput, FilteredEdge, validate_input
from ripsph.filtration import WeightedGraph, graph_from_input

SQRT2 = math.sqrt(2)

SQUARE_WITH_DIAGONALS = [
    [0, 1, SQRT2, 1],
    [1, 0, 1, SQRT2],
    [SQRT2, 1, 0, 1],
    [1, SQRT2, 1, 0],
]


def graph_barcode(g: WeightedGraph, max_dim=1):
    m = sparse_to_matrix(g.n, g.edges, g.vertex_births)
    return oracle_barcode(m, max_dim)


def test_is_dominated_triangle():
    nbr = NeighborhoodIndex(3)
    for u, v in ((0, 1), (0, 2), (1, 2)):
        nbr.add(u, v, 1.0)
    assert is_dominated(FilteredEdge(0, 1, 1.0), 1.0, nbr) == 2


def test_is_dominated_square_no_diagonals():
    nbr = NeighborhoodIndex(4)
    for u, v in ((0, 1), (1, 2), (2, 3), (0, 3)):
        nbr.add(u, v, 1.0)
    for u, v in ((0, 1), (1, 2), (2, 3), (0, 3)):
        assert is_dominated(FilteredEdge(u, v, 1.0), 1.0, nbr) is None


def test_is_dominated_square_with_diagonals():
    nbr = NeighborhoodIndex(4)
    for u, v in ((0, 1), (1, 2), (2, 3), (0, 3)):
        nbr.add(u, v, 1.0)
    nbr.add(0, 2, SQRT2)
    nbr.add(1, 3, SQRT2)
    # at t = sqrt(2) every side is dominated by the opposite corner
    for u, v in ((0, 1), (1, 2), (2, 3), (0, 3)):
        w = is_dominated(FilteredEdge(u, v, 1.0), SQRT2, nbr)
        assert w is not None and w not in (u, v)
    # at its own value a side has no mutual neighbours yet
    assert is_dominated(FilteredEdge(0, 1, 1.0), 1.0, nbr) is None


def test_collapse_square_with_diagonals_preserves_h1():
    data = validate_input(DistanceInput.dense(SQUARE_WITH_DIAGONALS))
    g = graph_from_input(data)
    out = collapse(g)
    assert len(out.edges) < len(g.edges)
    assert graph_barcode(out, 1) == graph_barcode(g, 1)
    assert graph_barcode(out, 1)[1] == [(1.0, SQRT2)]


def test_collapse_complete_graph_to_cone():
    n = 6
    m = np.full((n, n), 1.0)
    np.fill_diagonal(m, 0.0)
    g = graph_from_input(validate_input(DistanceInput.dense(m)))
    out = collapse(g)
    assert len(out.edges) < len(g.edges)
    assert graph_barcode(out, 2) == graph_barcode(g, 2)


def test_collapse_single_edge_unchanged():
    g = WeightedGraph.build(2, [0.0, 0.0], [(0, 1, 1.0)])
    assert collapse(g) == g


def test_collapse_is_deterministic():
    rng = np.random.default_rng(2024)
    m = random_symmetric(rng, 15)
    g = graph_from_input(validate_input(DistanceInput.dense(m)))
    out1 = collapse(g)
    out2 = collapse(g)
    assert out1 == out2


def test_collapse_preserves_barcode_random():
    rng = np.random.default_rng(99)
    for _ in range(12):
        n = int(rng.integers(4, 11))
        m = random_symmetric(rng, n)
        g = graph_from_input(validate_input(DistanceInput.dense(m)))
        out = collapse(g)
        assert len(out.edges) <= len(g.edges)
        assert out.n == g.n
        assert graph_barcode(out, 3) == graph_barcode(g, 3)


def test_collapse_commutes_with_thresholding():
    rng = np.random.default_rng(5)
    m = random_symmetric(rng, 9)
    t = 0.6
    data = validate_input(DistanceInput.dense(m))
    collapsed = collapse(graph_from_input(data, threshold=t))
    direct = oracle_barcode(m.tolist(), 2, t)
    via = oracle_barcode(sparse_to_matrix(collapsed.n, collapsed.edges,
                                          collapsed.vertex_births), 2, t)
    assert via == direct


def test_collapse_with_vertex_births():
    rng = np.random.default_rng(31)
    m = random_symmetric(rng, 8)
    births = rng.random(8) * 0.3
    np.fill_diagonal(m, births)
    data = validate_input(DistanceInput.dense(m))
    g = graph_from_input(data)
    out = collapse(g)
    assert graph_barcode(out, 2) == graph_barcode(g, 2)
