"""Implicit Vietoris-Rips / flag filtration machinery.

Simplices are identified by their combinatorial index: a d-simplex with
vertices v_d > ... > v_0 has index sum_i C(v_i, i+1), a bijection onto
[0, C(n, d+1)).  The engine-wide filtration total order is (diameter
ascending, index descending); every enumerator here respects it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    UINT64_MAX,
    DistanceInput,
    DTM_MODE_STRICT,
    DTM_MODE_VR,
    FilteredEdge,
    IndexOverflow,
    KTooLarge,
    RankOutOfRange,
    UnsupportedMixExponent,
)

INF = math.inf


class SimplexRank(NamedTuple):
    """Combinatorial index plus dimension; identifies a simplex implicitly."""

    index: int
    dim: int


class BinomialTable:
    """Exact table of C(n, k) for n <= n_max, k <= k_max.

    Construction fails with :class:`IndexOverflow` if any required entry
    exceeds the 64-bit unsigned range, which is the enumeration frontier of
    the whole engine.
    """

    __slots__ = ("n_max", "k_max", "_rows", "_array")

    def __init__(self, n_max: int, k_max: int):
        # Probe the extreme entries before building anything: the table (and
        # the ranks derived from it) must stay below 2**64.
        for k in range(k_max + 1):
            if math.comb(n_max, k) > UINT64_MAX:
                raise IndexOverflow(
                    f"C({n_max}, {k}) exceeds the 64-bit simplex enumeration bound"
                )
        self.n_max = n_max
        self.k_max = k_max
        rows = []
        for n in range(n_max + 1):
            row = [0] * (k_max + 1)
            row[0] = 1
            for k in range(1, k_max + 1):
                if k <= n:
                    row[k] = rows[n - 1][k - 1] + rows[n - 1][k] if n > 0 else 0
            rows.append(row)
        self._rows = rows
        self._array = None

    def __call__(self, n: int, k: int) -> int:
        if k < 0 or k > self.k_max:
            return 0
        if n < 0:
            return 0
        if n > self.n_max:
            raise IndexOverflow(f"C({n}, {k}) outside table bounds (n_max={self.n_max})")
        return self._rows[n][k]

    def as_array(self) -> np.ndarray:
        """uint64 view of the table for the compiled kernels."""
        if self._array is None:
            self._array = np.array(self._rows, dtype=np.uint64)
        return self._array


def binomial_table(n: int, max_dim: int) -> BinomialTable:
    """Table covering every coefficient needed up to homology dimension max_dim.

    Cofacets of (max_dim+1)-simplices are enumerated during reduction, so
    entries up to k = max_dim + 2 must exist.
    """
    return BinomialTable(n, max_dim + 2)


def rank_simplex(vertices: Sequence[int], binom: BinomialTable) -> SimplexRank:
    """Rank of a simplex given as a strictly decreasing vertex list."""
    vs = list(vertices)
    d = len(vs) - 1
    if d < 0:
        raise ValueError("empty vertex list")
    index = 0
    for i in range(d + 1):
        if i < d and not vs[i] > vs[i + 1]:
            raise ValueError(f"vertices must be strictly decreasing, got {vertices}")
        # vs[i] has ascending position d - i
        index += binom(vs[i], d - i + 1)
    return SimplexRank(index, d)


def unrank_simplex(rank: SimplexRank, n: int, binom: BinomialTable) -> Tuple[int, ...]:
    """Inverse of :func:`rank_simplex`; returns the decreasing vertex tuple."""
    index, d = rank
    if index < 0 or index >= binom(n, d + 1):
        raise RankOutOfRange(f"index {index} out of range for dim {d} on {n} vertices")
    out = []
    rem = index
    top = n - 1
    for j in range(d, -1, -1):
        # Largest v <= top with C(v, j+1) <= rem, found by binary search.
        lo, hi = j, top
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if binom(mid, j + 1) <= rem:
                lo = mid
            else:
                hi = mid - 1
        out.append(lo)
        rem -= binom(lo, j + 1)
        top = lo - 1
    return tuple(out)


def vertex_list_rank(vs_desc, binom) -> int:
    """Plain-int rank of a decreasing vertex sequence (no checks)."""
    d = len(vs_desc) - 1
    return sum(binom(v, d - i + 1) for i, v in enumerate(vs_desc))


def diameter(vertices: Sequence[int], data: DistanceInput) -> float:
    """Filtration value of a simplex: max pairwise entry and member births.

    For sparse input an absent pair makes the diameter +inf.
    """
    vs = list(vertices)
    best = max(float(data.vertex_births[v]) for v in vs)
    if data.is_dense:
        m = data.values
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                w = float(m[vs[i], vs[j]])
                if w > best:
                    best = w
    else:
        adj = _sparse_adjacency(data)
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                w = adj[vs[i]].get(vs[j], INF)
                if w > best:
                    best = w
                if w == INF:
                    return INF
    return best


def _sparse_adjacency(data: DistanceInput):
    adj = [dict() for _ in range(data.n)]
    for u, v, w in data.edges:
        adj[u][v] = w
        adj[v][u] = w
    return adj


def enclosing_radius(data: DistanceInput) -> float:
    """Radius above which the complex becomes a cone: min over rows of the row max."""
    if not data.is_dense:
        raise ValueError("enclosing radius is defined for dense input only")
    return float(np.min(np.max(data.values, axis=1)))


def sorted_edges(data: DistanceInput, threshold: float = INF) -> List[FilteredEdge]:
    """Edges with effective weight <= threshold in filtration order.

    The effective weight is max(raw weight, endpoint births) so the list is
    the dimension-1 skeleton in filtration order; ties are broken by
    descending combinatorial rank, the engine-wide convention.
    """
    births = data.vertex_births
    edges = []
    if data.is_dense:
        if data.n >= 2:
            uu, vv = np.triu_indices(data.n, 1)
            b = np.asarray(births)
            w = np.maximum(data.values[uu, vv], np.maximum(b[uu], b[vv]))
            keep = w <= threshold
            uu, vv, w = uu[keep], vv[keep], w[keep]
            ranks = vv.astype(np.int64) * (vv.astype(np.int64) - 1) // 2 + uu
            order = np.lexsort((-ranks, w))
            edges = [
                FilteredEdge(int(uu[i]), int(vv[i]), float(w[i])) for i in order
            ]
        return edges
    for u, v, w in data.edges:
        we = max(w, float(births[u]), float(births[v]))
        if we <= threshold:
            edges.append(FilteredEdge(u, v, we))
    # rank of edge (v > u) is C(v,2) + u; descending rank on weight ties
    edges.sort(key=lambda e: (e.weight, -(e.v * (e.v - 1) // 2 + e.u)))
    return edges


@dataclass(frozen=True)
class WeightedGraph:
    """Weighted flag-filtration skeleton: vertex births plus sorted edges.

    Every edge weight is >= the births of its endpoints; edges are sorted by
    (weight ascending, rank descending).
    """

    n: int
    vertex_births: Tuple[float, ...]
    edges: Tuple[FilteredEdge, ...]

    @classmethod
    def build(cls, n, vertex_births, edges) -> "WeightedGraph":
        births = tuple(float(b) for b in vertex_births)
        lifted = [
            FilteredEdge(u, v, max(float(w), births[u], births[v]))
            for u, v, w in edges
        ]
        lifted.sort(key=lambda e: (e.weight, -(e.v * (e.v - 1) // 2 + e.u)))
        return cls(n, births, tuple(lifted))


def graph_from_input(data: DistanceInput, threshold: float = INF) -> WeightedGraph:
    """Thresholded 1-skeleton of a validated input as a WeightedGraph."""
    return WeightedGraph(
        data.n,
        tuple(float(b) for b in data.vertex_births),
        tuple(sorted_edges(data, threshold)),
    )


def dtm_weights(data: DistanceInput, k: int, r: float) -> List[float]:
    """Distance-to-measure vertex weights.

    weight_i = ((1/k) * sum of d(i, j)^r over the k nearest neighbours of i,
    self excluded)^(1/r).
    """
    if not data.is_dense:
        raise ValueError("DTM weights require a dense distance matrix")
    n = data.n
    if not 1 <= k < n:
        raise KTooLarge(f"k={k} must satisfy 1 <= k < n={n}")
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    m = data.values
    out = []
    for i in range(n):
        row = np.delete(m[i], i)
        if k < len(row):
            nearest = np.partition(row, k - 1)[:k]
        else:
            nearest = row
        out.append(float(np.mean(np.abs(nearest) ** r) ** (1.0 / r)))
    return out


def mixed_edge_value(w_i: float, w_j: float, d: float, p_mix, mode=DTM_MODE_VR) -> float:
    """Edge filtration value of the weighted filtration.

    ``mode="strict"`` uses the two-ball intersection radius with the raw
    distance d; ``mode="vr"`` substitutes 2d so that zero weights reproduce
    the classical edge value d.
    """
    if mode == DTM_MODE_STRICT:
        eff = d
    elif mode == DTM_MODE_VR:
        eff = 2.0 * d
    else:
        raise ValueError(f"unknown mode {mode!r}")
    hi, lo = (w_i, w_j) if w_i >= w_j else (w_j, w_i)
    if hi == 0.0 and lo == 0.0:
        # exact for every p_mix; keeps the zero-weight reduction bitwise
        return eff / 2.0
    if p_mix == math.inf:
        return max(hi, eff / 2.0)
    if p_mix == 1:
        if eff <= hi - lo:
            return hi
        return (w_i + w_j + eff) / 2.0
    if p_mix == 2:
        if eff * eff <= hi * hi - lo * lo:
            return hi
        s = eff / 2.0
        q = s * s
        a = (w_i + w_j) / 2.0
        b = (w_i - w_j) / 2.0
        return math.sqrt((q + a * a) * (q + b * b)) / s
    raise UnsupportedMixExponent(f"p_mix must be 1, 2 or inf, got {p_mix}")


def weighted_graph(data: DistanceInput, weights: Sequence[float], p_mix,
                   mode=DTM_MODE_VR) -> WeightedGraph:
    """Re-weighted filtration skeleton: vertex births become the weights and
    every edge value follows the mixing rule for ``p_mix``."""
    if p_mix not in (1, 2, math.inf):
        raise UnsupportedMixExponent(f"p_mix must be 1, 2 or inf, got {p_mix}")
    weights = [float(w) for w in weights]
    if len(weights) != data.n:
        raise ValueError(f"expected {data.n} weights, got {len(weights)}")
    edges = []
    if data.is_dense:
        m = data.values
        if np.any(m[~np.eye(data.n, dtype=bool)] < 0):
            raise ValueError("negative distances are not supported with weighting")
        for u in range(data.n):
            for v in range(u + 1, data.n):
                t = mixed_edge_value(weights[u], weights[v], float(m[u, v]), p_mix, mode)
                edges.append((u, v, t))
    else:
        for u, v, w in data.edges:
            if w < 0:
                raise ValueError("negative distances are not supported with weighting")
            edges.append((u, v, mixed_edge_value(weights[u], weights[v], w, p_mix, mode)))
    return WeightedGraph.build(data.n, weights, edges)


def weighted_dense_matrix(data: DistanceInput, weights, p_mix, mode=DTM_MODE_VR) -> DistanceInput:
    """Dense re-weighted matrix: diagonal = weights, off-diagonal = mixed values."""
    g = weighted_graph(data, weights, p_mix, mode)
    m = np.zeros((data.n, data.n), dtype=np.float64)
    np.fill_diagonal(m, np.asarray(g.vertex_births))
    for u, v, w in g.edges:
        m[u, v] = m[v, u] = w
    out = DistanceInput("dense", data.n, m, None, np.asarray(g.vertex_births))
    out._validated = True
    return out


class FiltrationContext:
    """Shared read-only state for simplex enumeration.

    Pairwise lookups go through the *effective* weights (raw value lifted to
    endpoint births) so that diameters of simplices of dimension >= 1 are
    plain maxima over member pairs.
    """

    __slots__ = (
        "n", "births", "dense_eff", "adj", "nbr", "binom", "threshold",
        "modulus", "inv",
    )

    def __init__(self, *, n, births, binom, threshold, modulus, inv,
                 dense_eff=None, adj=None):
        self.n = n
        self.births = births
        self.dense_eff = dense_eff
        self.adj = adj
        self.nbr = None if adj is None else [sorted(a) for a in adj]
        self.binom = binom
        self.threshold = threshold
        self.modulus = modulus
        self.inv = inv

    @classmethod
    def from_input(cls, data: DistanceInput, binom, threshold, modulus, inv):
        births = np.asarray(data.vertex_births, dtype=np.float64)
        if data.is_dense:
            m = data.values
            eff = np.maximum(m, np.maximum(births[:, None], births[None, :]))
            np.fill_diagonal(eff, births)
            return cls(n=data.n, births=births, binom=binom, threshold=threshold,
                       modulus=modulus, inv=inv, dense_eff=eff)
        adj = [dict() for _ in range(data.n)]
        for u, v, w in data.edges:
            we = max(w, float(births[u]), float(births[v]))
            if we <= threshold:
                adj[u][v] = we
                adj[v][u] = we
        return cls(n=data.n, births=births, binom=binom, threshold=threshold,
                   modulus=modulus, inv=inv, adj=adj)

    @classmethod
    def from_graph(cls, g: WeightedGraph, binom, threshold, modulus, inv):
        adj = [dict() for _ in range(g.n)]
        for u, v, w in g.edges:
            if w <= threshold:
                adj[u][v] = w
                adj[v][u] = w
        return cls(n=g.n, births=np.asarray(g.vertex_births), binom=binom,
                   threshold=threshold, modulus=modulus, inv=inv, adj=adj)

    @property
    def is_dense(self):
        return self.dense_eff is not None

    def pair_weight(self, a, b):
        if self.dense_eff is not None:
            return float(self.dense_eff[a, b])
        return self.adj[a].get(b, INF)

    def vertices_desc(self, rank, dim) -> Tuple[int, ...]:
        out = []
        rem = rank
        top = self.n - 1
        binom = self.binom
        for j in range(dim, -1, -1):
            lo, hi = j, top
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if binom(mid, j + 1) <= rem:
                    lo = mid
                else:
                    hi = mid - 1
            out.append(lo)
            rem -= binom(lo, j + 1)
            top = lo - 1
        return tuple(out)

    def simplex_diameter(self, rank, dim) -> float:
        vs = self.vertices_desc(rank, dim)
        if dim == 0:
            return float(self.births[vs[0]])
        best = -INF
        for i in range(dim + 1):
            for j in range(i + 1, dim + 1):
                w = self.pair_weight(vs[i], vs[j])
                if w > best:
                    best = w
        return best

    def _candidates_desc(self, vs_desc, above_only):
        """Candidate inserted vertices in strictly decreasing order."""
        if self.dense_eff is not None:
            start = self.n - 1
            stop = vs_desc[0] if above_only else -1
            return range(start, stop, -1)
        common = None
        for v in vs_desc:
            s = set(self.adj[v])
            common = s if common is None else (common & s)
            if not common:
                return ()
        if above_only:
            common = {w for w in common if w > vs_desc[0]}
        return sorted(common, reverse=True)

    def cofacets_signed(self, rank, dim, diam, above_only=False):
        """Yield (rank, diameter, sign) of cofacets within threshold.

        Enumeration order is decreasing inserted vertex; the diameter is the
        incremental max of the simplex diameter and the new vertex's pair
        weights.  The sign is the mod-p coboundary coefficient.
        """
        binom = self.binom
        p = self.modulus
        vs = self.vertices_desc(rank, dim)
        members = set(vs)
        idx_below = rank
        idx_above = 0
        k = dim + 1
        j = 0
        threshold = self.threshold
        dense = self.dense_eff
        adj = self.adj
        for w in self._candidates_desc(vs, above_only):
            if w in members:
                continue
            while j <= dim and vs[j] > w:
                idx_below -= binom(vs[j], k)
                idx_above += binom(vs[j], k + 1)
                k -= 1
                j += 1
            cdiam = diam
            if dense is not None:
                row = dense[w]
                for v in vs:
                    d2 = float(row[v])
                    if d2 > cdiam:
                        cdiam = d2
            else:
                aw = adj[w]
                for v in vs:
                    d2 = aw[v]
                    if d2 > cdiam:
                        cdiam = d2
            if cdiam <= threshold:
                crank = idx_above + binom(w, k + 1) + idx_below
                sign = 1 if k % 2 == 0 else p - 1
                yield crank, cdiam, sign

    def facets_with_diam(self, rank, dim):
        """Yield (rank, diameter, reinsertion sign) dropping the largest vertex first."""
        if dim == 0:
            return
        vs = self.vertices_desc(rank, dim)
        p = self.modulus
        binom = self.binom
        for j in range(dim + 1):
            rest = vs[:j] + vs[j + 1:]
            if dim - 1 == 0:
                fdiam = float(self.births[rest[0]])
            else:
                fdiam = -INF
                for a in range(dim):
                    for b in range(a + 1, dim):
                        w = self.pair_weight(rest[a], rest[b])
                        if w > fdiam:
                            fdiam = w
            frank = vertex_list_rank(rest, binom)
            # ascending position of the dropped vertex vs[j] is dim - j
            sign = 1 if (dim - j) % 2 == 0 else p - 1
            yield frank, fdiam, sign

    def first_equal_cofacet(self, rank, dim, diam):
        for crank, cdiam, sign in self.cofacets_signed(rank, dim, diam):
            if cdiam == diam:
                return crank, sign
        return None

    def first_equal_facet(self, rank, dim, diam):
        for frank, fdiam, sign in self.facets_with_diam(rank, dim):
            if fdiam == diam:
                return frank, sign
        return None

    def zero_apparent_cofacet(self, rank, dim, diam):
        """Cofacet forming a zero-persistence apparent pair with this simplex."""
        hit = self.first_equal_cofacet(rank, dim, diam)
        if hit is None:
            return None
        crank, sign = hit
        back = self.first_equal_facet(crank, dim + 1, diam)
        if back is not None and back[0] == rank:
            return crank, sign
        return None

    def zero_apparent_facet(self, rank, dim, diam):
        """Facet whose apparent cofacet is this simplex, if any."""
        hit = self.first_equal_facet(rank, dim, diam)
        if hit is None:
            return None
        frank, sign = hit
        back = self.first_equal_cofacet(frank, dim - 1, diam)
        if back is not None and back[0] == rank:
            return frank, sign
        return None

    def in_zero_apparent_pair(self, rank, dim, diam):
        if self.zero_apparent_cofacet(rank, dim, diam) is not None:
            return True
        return dim >= 1 and self.zero_apparent_facet(rank, dim, diam) is not None


def cofacet_enumerator(simplex: SimplexRank, data: DistanceInput,
                       threshold: float = INF,
                       binom: Optional[BinomialTable] = None,
                       ) -> Iterator[Tuple[SimplexRank, float]]:
    """Stream of (cofacet, diameter), decreasing inserted vertex, within threshold."""
    if binom is None:
        binom = binomial_table(data.n, simplex.dim + 1)
    ctx = FiltrationContext.from_input(data, binom, threshold, 2, (0, 1))
    diam = ctx.simplex_diameter(simplex.index, simplex.dim)
    for crank, cdiam, _ in ctx.cofacets_signed(simplex.index, simplex.dim, diam):
        yield SimplexRank(crank, simplex.dim + 1), cdiam


def facet_enumerator(simplex: SimplexRank, n: int,
                     binom: Optional[BinomialTable] = None,
                     ) -> Iterator[SimplexRank]:
    """Stream of facets, dropping vertices from largest to smallest."""
    if simplex.dim == 0:
        return
    if binom is None:
        binom = binomial_table(n, simplex.dim)
    vs = unrank_simplex(simplex, n, binom)
    for j in range(simplex.dim + 1):
        rest = vs[:j] + vs[j + 1:]
        yield SimplexRank(vertex_list_rank(rest, binom), simplex.dim - 1)
