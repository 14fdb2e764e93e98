"""Backend selection: compiled kernels when available, pure Python otherwise.

Both backends run the same algorithm and produce bitwise-identical barcodes;
the compiled one releases the GIL inside the reduction so worker threads
actually run concurrently.  Force a choice with the ``RIPSPH_BACKEND``
environment variable ("compiled" or "python") or ``ComputeParams.backend``.
"""

from __future__ import annotations

import os

import numpy as np

from . import reduction
from .filtration import FiltrationContext

try:
    from . import _kernels
except ImportError:
    _kernels = None


class PythonBackend:
    name = "python"

    def make_ctx(self, *, data=None, graph=None, binom, threshold, modulus, inv):
        if graph is not None:
            return FiltrationContext.from_graph(graph, binom, threshold, modulus, inv)
        return FiltrationContext.from_input(data, binom, threshold, modulus, inv)

    def dim1(self, ctx, edges):
        return reduction.dim1_simplices(edges)

    def make_cleared(self, ranks):
        return set(ranks)

    def reduce_dimension(self, ctx, d, simplices, cleared, pool, opts):
        return reduction.reduce_dimension(ctx, d, simplices, cleared, pool, opts)

    def assemble_next(self, ctx, simplices, d):
        return reduction.assemble_next(ctx, simplices, d)

    def simplex_count(self, simplices):
        return len(simplices[0])


class CompiledBackend:
    name = "compiled"

    def make_ctx(self, *, data=None, graph=None, binom, threshold, modulus, inv):
        inv_arr = np.asarray(inv, dtype=np.uint32)
        table = binom.as_array()
        if graph is not None:
            n = graph.n
            births = np.asarray(graph.vertex_births, dtype=np.float64)
            edges = [(u, v, w) for u, v, w in graph.edges if w <= threshold]
            return _kernels.Ctx.from_sparse(n, births, edges, table, threshold,
                                            modulus, inv_arr)
        births = np.asarray(data.vertex_births, dtype=np.float64)
        if data.is_dense:
            m = data.values
            eff = np.maximum(m, np.maximum(births[:, None], births[None, :]))
            np.fill_diagonal(eff, births)
            return _kernels.Ctx.from_dense(np.ascontiguousarray(eff), births,
                                           table, threshold, modulus, inv_arr)
        edges = []
        for u, v, w in data.edges:
            we = max(w, float(births[u]), float(births[v]))
            if we <= threshold:
                edges.append((u, v, we))
        return _kernels.Ctx.from_sparse(data.n, births, edges, table, threshold,
                                        modulus, inv_arr)

    def dim1(self, ctx, edges):
        ranks = np.array(
            [e.v * (e.v - 1) // 2 + e.u for e in edges], dtype=np.uint64
        )
        diams = np.array([e.weight for e in edges], dtype=np.float64)
        return ranks, diams

    def make_cleared(self, ranks):
        return np.sort(np.fromiter(ranks, dtype=np.uint64, count=len(ranks)))

    def reduce_dimension(self, ctx, d, simplices, cleared, pool, opts):
        return _kernels.reduce_dimension(ctx, d, simplices[0], simplices[1],
                                         cleared, pool, opts)

    def assemble_next(self, ctx, simplices, d):
        return _kernels.assemble_next(ctx, simplices[0], simplices[1], d)

    def simplex_count(self, simplices):
        return int(simplices[0].shape[0])


def compiled_available() -> bool:
    return _kernels is not None


def available_backends():
    names = ["python"]
    if compiled_available():
        names.insert(0, "compiled")
    return names


def resolve_backend(name=None):
    if name is None:
        name = os.environ.get("RIPSPH_BACKEND") or None
    if name in (None, "auto"):
        name = "compiled" if compiled_available() else "python"
    if name == "python":
        return PythonBackend()
    if name == "compiled":
        if not compiled_available():
            raise RuntimeError(
                "compiled backend requested but ripsph._kernels is not built"
            )
        return CompiledBackend()
    raise ValueError(f"unknown backend {name!r}")
