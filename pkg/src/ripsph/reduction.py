"""Barcode computation: union-find in dimension 0, then per-dimension
implicit coboundary reduction with clearing and apparent pairs.

Columns (d-simplices) are processed in reverse filtration order; a column's
pivot is its earliest cofacet in filtration order.  Claims go through a
shared pivot table whose final content encodes the persistence pairing, so
the output is identical for every worker count and interleaving.  Additions
always pull from columns earlier in the processing order, which is what
makes out-of-order reduction sound.
"""

from __future__ import annotations

import math
from heapq import heapify, heappop, heappush
from threading import Lock
from typing import Dict, List, Optional, Set, Tuple

from .core import FilteredEdge
from .filtration import FiltrationContext, SimplexRank

INF = math.inf

CLAIMED = 0
LOSES_TO = 1
DISPLACES = 2


class PivotTable:
    """Concurrent map from pivot rank to the claiming column's position.

    The compiled backend realizes this as an open-addressed compare-and-swap
    table; this fallback guards the same claim protocol with a mutex.  At
    quiescence each pivot maps to exactly one column.
    """

    __slots__ = ("_columns", "_diams", "_lock")

    def __init__(self, capacity_hint: int = 0):
        self._columns: Dict[int, int] = {}
        self._diams: Dict[int, float] = {}
        self._lock = Lock()

    def claim(self, pivot_rank: int, pivot_diam: float, pos: int):
        """Atomically publish (pivot -> pos).

        Returns (CLAIMED, None) on an empty slot, (LOSES_TO, other) when an
        earlier column holds the slot, or (DISPLACES, other) after replacing
        a later column.  Earlier means smaller position in reduction order.
        """
        with self._lock:
            cur = self._columns.get(pivot_rank)
            if cur is None:
                self._columns[pivot_rank] = pos
                self._diams[pivot_rank] = pivot_diam
                return CLAIMED, None
            if cur < pos:
                return LOSES_TO, cur
            self._columns[pivot_rank] = pos
            return DISPLACES, cur

    def lookup(self, pivot_rank: int) -> Optional[int]:
        return self._columns.get(pivot_rank)

    def items(self):
        return [(r, pos, self._diams[r]) for r, pos in self._columns.items()]

    def __len__(self):
        return len(self._columns)


def compute_dim0(edges: List[FilteredEdge], vertex_births, n: int,
                 threshold: float = INF):
    """Union-find pass over edges in filtration order.

    Each merging edge kills the younger of the two components it joins
    (elder rule); surviving components emit one infinite bar each.  Returns
    (bars, cleared) where ``cleared`` holds the ranks of all merging edges,
    exactly the columns dimension 1 may skip.
    """
    parent = list(range(n))
    rank_uf = [0] * n
    birth = [float(b) for b in vertex_births]
    alive = [birth[v] <= threshold for v in range(n)]

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    bars = []
    cleared: Set[int] = set()
    for u, v, w in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        cleared.add(v * (v - 1) // 2 + u)
        younger = max(birth[ru], birth[rv])
        if w > younger:
            bars.append((younger, w))
        if rank_uf[ru] < rank_uf[rv]:
            ru, rv = rv, ru
        parent[rv] = ru
        birth[ru] = min(birth[ru], birth[rv])
        if rank_uf[ru] == rank_uf[rv]:
            rank_uf[ru] += 1
    roots = {find(v) for v in range(n) if alive[v]}
    for r in sorted(roots):
        bars.append((birth[r], INF))
    return bars, cleared


def find_apparent_pair(column: SimplexRank, ctx: FiltrationContext,
                       diam: Optional[float] = None) -> Optional[SimplexRank]:
    """Zero-persistence cofacet pairing with ``column``, or None.

    The candidate is the first cofacet with equal diameter in enumeration
    order; it qualifies only if the column is in turn that cofacet's maximal
    equal-diameter facet.
    """
    if diam is None:
        diam = ctx.simplex_diameter(column.index, column.dim)
    hit = ctx.zero_apparent_cofacet(column.index, column.dim, diam)
    if hit is None:
        return None
    return SimplexRank(hit[0], column.dim + 1)


def _pop_pivot(heap, p):
    """Pop the earliest-in-filtration entry, merging duplicates mod p."""
    while heap:
        d0, nr0, c0 = heappop(heap)
        coeff = c0
        while heap and heap[0][1] == nr0:
            coeff += heappop(heap)[2]
        coeff %= p
        if coeff:
            return d0, -nr0, coeff
    return None


class _DimReducer:
    """State shared by all workers while reducing one dimension."""

    def __init__(self, ctx, dim, cols_rank, cols_diam, opts):
        self.ctx = ctx
        self.dim = dim
        self.cols_rank = cols_rank
        self.cols_diam = cols_diam
        self.opts = opts
        self.table = PivotTable()
        self.published: List[Optional[Tuple]] = [None] * len(cols_rank)
        self.essential: List[int] = []

    def reduce_range(self, lo, hi):
        for pos in range(lo, hi):
            self._reduce_column(pos)

    def _push_coboundary(self, heap, rank, diam, scale):
        ctx, dim, p = self.ctx, self.dim, self.ctx.modulus
        for crank, cdiam, csign in ctx.cofacets_signed(rank, dim, diam):
            c = (scale * csign) % p
            if c:
                heappush(heap, (cdiam, -crank, c))

    def _publish(self, pos, V, pivot_coeff):
        """Store this column's combination, scaled so its pivot coefficient is 1."""
        p = self.ctx.modulus
        scale = self.ctx.inv[pivot_coeff]
        merged: Dict[int, Tuple[float, int]] = {}
        for rank, diam, coeff in V:
            prev = merged.get(rank)
            c = (prev[1] + coeff) % p if prev else coeff % p
            merged[rank] = (diam, c)
        self.published[pos] = tuple(
            (rank, diam, (c * scale) % p)
            for rank, (diam, c) in merged.items() if c
        )

    def _reduce_column(self, pos):
        ctx = self.ctx
        p = ctx.modulus
        dim = self.dim
        apparent = self.opts.get("apparent", True)
        table = self.table

        rank = self.cols_rank[pos]
        diam = self.cols_diam[pos]
        V = [(rank, diam, 1)]
        heap = []

        # First enumeration, with the emergent-pair shortcut: if the first
        # equal-diameter cofacet is unclaimed and not itself apparently
        # paired, try to pair immediately without materializing the rest.
        entries = []
        emergent = None
        check_emergent = apparent
        for crank, cdiam, csign in ctx.cofacets_signed(rank, dim, diam):
            entries.append((cdiam, -crank, csign))
            if check_emergent and cdiam == diam:
                if (table.lookup(crank) is None
                        and ctx.zero_apparent_facet(crank, dim + 1, cdiam) is None):
                    emergent = (cdiam, crank, csign)
                    break
                check_emergent = False

        if emergent is not None:
            pdiam, prank, pcoeff = emergent
            self._publish(pos, V, pcoeff)
            status, other = table.claim(prank, pdiam, pos)
            if status == CLAIMED:
                return
            if status == DISPLACES:
                pos, V, heap = self._adopt(other)
            else:
                # Re-enumerate in full and fall through to the generic loop.
                entries = [(cd, -cr, cs)
                           for cr, cd, cs in ctx.cofacets_signed(rank, dim, diam)]
                heap = entries
                heapify(heap)
        else:
            heap = entries
            heapify(heap)

        while True:
            piv = _pop_pivot(heap, p)
            if piv is None:
                self.essential.append(pos)
                return
            pdiam, prank, pcoeff = piv
            if apparent:
                ap = ctx.zero_apparent_facet(prank, dim + 1, pdiam)
                if ap is not None:
                    # The pivot is apparently paired with a facet: treat that
                    # facet as an already-reduced virtual column and add it.
                    frank, fsign = ap
                    lam = ((p - pcoeff) * ctx.inv[fsign]) % p
                    heappush(heap, (pdiam, -prank, pcoeff))
                    self._push_coboundary(heap, frank, pdiam, lam)
                    V.append((frank, pdiam, lam))
                    continue
            self._publish(pos, V, pcoeff)
            status, other = table.claim(prank, pdiam, pos)
            if status == CLAIMED:
                return
            if status == LOSES_TO:
                lam = p - pcoeff  # the other column's pivot coefficient is 1
                heappush(heap, (pdiam, -prank, pcoeff))
                for erank, ediam, ecoeff in self.published[other]:
                    c = (lam * ecoeff) % p
                    V.append((erank, ediam, c))
                    self._push_coboundary(heap, erank, ediam, c)
                continue
            pos, V, heap = self._adopt(other)

    def _adopt(self, pos):
        """Resume a displaced column from its published combination."""
        V = list(self.published[pos])
        heap = []
        for erank, ediam, ecoeff in V:
            self._push_coboundary(heap, erank, ediam, ecoeff)
        return pos, V, heap


def reduce_dimension(ctx: FiltrationContext, d: int, simplices, cleared: Set[int],
                     pool, opts) -> Tuple[list, list, Set[int], dict]:
    """Reduce dimension d and return (pairs, essential, cleared_next, counters).

    ``simplices`` is the full (ranks, diams) list of d-simplices in
    filtration order; columns cleared from dimension d-1 or skipped as
    apparent pairs never enter the reduction.  ``pairs`` holds
    (birth_diam, death_diam, column_rank, pivot_rank) at quiescence;
    ``cleared_next`` holds every claimed pivot rank.
    """
    ranks, diams = simplices
    use_clearing = opts.get("clearing", True)
    use_apparent = opts.get("apparent", True)

    counters = {"columns": 0, "cleared": 0, "apparent": 0}
    cols_rank = []
    cols_diam = []
    apparent_skip = []
    for r, dm in zip(ranks, diams):
        if r in cleared:
            if use_clearing:
                counters["cleared"] += 1
                continue
        if use_apparent and ctx.in_zero_apparent_pair(r, d, dm):
            counters["apparent"] += 1
            apparent_skip.append(r)
            continue
        cols_rank.append(r)
        cols_diam.append(dm)
    # reverse filtration order: the reduction processes latest simplices first
    cols_rank.reverse()
    cols_diam.reverse()
    counters["columns"] = len(cols_rank)

    red = _DimReducer(ctx, d, cols_rank, cols_diam, opts)
    pool.run_parallel(len(cols_rank), red.reduce_range)

    pairs = []
    cleared_next: Set[int] = set()
    zero_pairs = 0
    for prank, pos, pdiam in red.table.items():
        cleared_next.add(prank)
        birth = cols_diam[pos]
        if pdiam > birth:
            pairs.append((birth, pdiam, cols_rank[pos], prank))
        else:
            zero_pairs += 1
    essential = []
    for pos in red.essential:
        if not use_clearing and cols_rank[pos] in cleared:
            continue
        essential.append((cols_diam[pos], cols_rank[pos]))
    counters["zero_pairs"] = zero_pairs
    counters["bars"] = len(pairs)
    counters["essential"] = len(essential)
    return pairs, essential, cleared_next, counters


def assemble_next(ctx: FiltrationContext, simplices, d: int):
    """All (d+1)-simplices within threshold, in filtration order.

    Each is generated exactly once, from its facet of smallest vertices by
    inserting a vertex above the current maximum.
    """
    ranks, diams = simplices
    out = []
    for r, dm in zip(ranks, diams):
        for crank, cdiam, _ in ctx.cofacets_signed(r, d, dm, above_only=True):
            out.append((cdiam, crank))
    out.sort(key=lambda t: (t[0], -t[1]))
    return [t[1] for t in out], [t[0] for t in out]


def dim1_simplices(edges: List[FilteredEdge]):
    """(ranks, diams) of the edge list, kept in its filtration order."""
    ranks = [e.v * (e.v - 1) // 2 + e.u for e in edges]
    diams = [e.weight for e in edges]
    return ranks, diams
