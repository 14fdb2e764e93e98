"""Edge-collapse preprocessing of a weighted flag filtration.

Removes edges whose common neighbourhood is a cone at every filtration time
from their appearance onward; the flag filtration of the output has exactly
the same barcode as the input's, in every dimension.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional

from .core import FilteredEdge
from .filtration import WeightedGraph

INF = math.inf


class NeighborhoodIndex:
    """Mutable adjacency over the retained edge set.

    Per-vertex neighbour maps carry the edge filtration values; the structure
    stays symmetric (u lists v iff v lists u) through removals.
    """

    __slots__ = ("adj",)

    def __init__(self, n: int):
        self.adj: List[Dict[int, float]] = [dict() for _ in range(n)]

    @classmethod
    def from_graph(cls, g: WeightedGraph) -> "NeighborhoodIndex":
        idx = cls(g.n)
        for u, v, w in g.edges:
            idx.add(u, v, w)
        return idx

    def add(self, u, v, w):
        self.adj[u][v] = w
        self.adj[v][u] = w

    def remove(self, u, v):
        del self.adj[u][v]
        del self.adj[v][u]

    def common_neighbors(self, u, v):
        """(w, arrival) for every mutual neighbour w; arrival is the time both
        edges to w exist."""
        au, av = self.adj[u], self.adj[v]
        if len(av) < len(au):
            au, av = av, au
        out = []
        for w, wu in au.items():
            wv = av.get(w)
            if wv is not None:
                out.append((w, wu if wu >= wv else wv))
        return out


def is_dominated(edge: FilteredEdge, t: float, nbr: NeighborhoodIndex) -> Optional[int]:
    """Witness vertex dominating ``edge`` at time ``t``, or None.

    A witness w is adjacent (at value <= t) to both endpoints and to every
    other common neighbour alive at t.  No mutual neighbour at all means no
    witness.
    """
    u, v = edge.u, edge.v
    alive = [w for w, arr in nbr.common_neighbors(u, v) if arr <= t]
    if not alive:
        return None
    adj = nbr.adj
    for w in alive:
        aw = adj[w]
        if all(x == w or aw.get(x, INF) <= t for x in alive):
            return w
    return None


def _dominated_from(edge: FilteredEdge, nbr: NeighborhoodIndex) -> bool:
    """True iff the edge is dominated at its own value and at every later
    arrival of a common neighbour.

    Between arrivals the neighbourhood is constant and adjacency only grows,
    so checking at each arrival time is exact.
    """
    t_e = edge.weight
    events = {t_e}
    for _, arr in nbr.common_neighbors(edge.u, edge.v):
        if arr > t_e:
            events.add(arr)
    for t in sorted(events):
        if is_dominated(edge, t, nbr) is None:
            return False
    return True


def collapse(graph: WeightedGraph) -> WeightedGraph:
    """Barcode-preserving edge collapse.

    Sweeps the retained edges in filtration order, removing any edge that is
    dominated from its birth onward in the current retained graph; sweeps
    repeat until a fixed point.  Deterministic, never adds edges, never
    changes the vertex set.
    """
    nbr = NeighborhoodIndex.from_graph(graph)
    retained = list(graph.edges)
    changed = True
    while changed:
        changed = False
        kept = []
        for e in retained:
            if _dominated_from(e, nbr):
                nbr.remove(e.u, e.v)
                changed = True
            else:
                kept.append(e)
        retained = kept
    return WeightedGraph(graph.n, graph.vertex_births, tuple(retained))
