"""Pipeline orchestration: validate -> weight -> threshold -> collapse ->
reduce, with per-stage timing and counters."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backend import resolve_backend
from .collapse import collapse
from .core import (
    Barcode,
    ComputeParams,
    DistanceInput,
    DTMWeighting,
    build_field_table,
    validate_input,
)
from .filtration import (
    WeightedGraph,
    binomial_table,
    dtm_weights,
    enclosing_radius,
    sorted_edges,
    weighted_dense_matrix,
    weighted_graph,
)
from .pool import WorkPool
from .reduction import compute_dim0

INF = math.inf


@dataclass
class PipelineReport:
    """Computation result: the barcode plus per-stage statistics."""

    barcode: Barcode
    stats: dict


def point_cloud_distances(points) -> DistanceInput:
    """Dense Euclidean distance matrix of a point cloud, zero diagonal."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("point cloud must be a 2-d array")
    diff = pts[:, None, :] - pts[None, :, :]
    m = np.sqrt((diff * diff).sum(axis=-1))
    return DistanceInput.dense(m)


def compute_persistence(data, params: Optional[ComputeParams] = None,
                        ) -> PipelineReport:
    """Run the full pipeline on a DistanceInput or a raw point-cloud array.

    Weighting (if any) is applied before thresholding; the Auto threshold
    resolves to the enclosing radius for dense inputs and +inf for sparse
    ones; thresholding happens before edge collapse; reduction runs
    dimension 0 first, then dimensions 1..D with clearing chained between
    them.
    """
    params = (params or ComputeParams()).validated()
    stats = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    if not isinstance(data, DistanceInput):
        data = point_cloud_distances(data)
    src = validate_input(data)
    stats["time_validate_s"] = time.perf_counter() - t0

    n = src.n
    D = params.max_dim

    t0 = time.perf_counter()
    if params.weighting is not None:
        if isinstance(params.weighting, DTMWeighting):
            w = params.weighting
            k = min(w.k, n - 1)
            weights = dtm_weights(src, k, w.r)
            p_mix, mode = w.p_mix, w.mode
        else:
            w = params.weighting
            weights = list(w.weights)
            p_mix, mode = w.p_mix, w.mode
        if src.is_dense:
            src = weighted_dense_matrix(src, weights, p_mix, mode)
        else:
            g = weighted_graph(src, weights, p_mix, mode)
            src = DistanceInput.sparse(n, list(g.edges), list(g.vertex_births))
            src._validated = True
    stats["time_weight_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if params.threshold is None:
        if src.is_dense:
            radius = enclosing_radius(src)
            threshold = radius
            stats["enclosing_radius"] = radius
        else:
            threshold = INF
    else:
        threshold = params.threshold

    # The 2**64 enumeration guard runs before any per-dimension allocation.
    binom = binomial_table(n, D)
    field = build_field_table(params.modulus)

    births = np.asarray(src.vertex_births, dtype=np.float64)
    edges = sorted_edges(src, threshold)
    stats["time_threshold_s"] = time.perf_counter() - t0
    stats["threshold"] = threshold
    stats["edges_before_collapse"] = len(edges)

    t0 = time.perf_counter()
    graph = None
    if params.collapse:
        graph = collapse(WeightedGraph(n, tuple(float(b) for b in births),
                                       tuple(edges)))
        edges = list(graph.edges)
        representation = "sparse"
    else:
        representation = "dense" if src.is_dense else "sparse"
    stats["time_collapse_s"] = time.perf_counter() - t0
    stats["edges_after_collapse"] = len(edges)
    possible = n * (n - 1) // 2
    stats["fill_ratio"] = (len(edges) / possible) if possible else 0.0
    stats["representation"] = representation

    t0 = time.perf_counter()
    bars0, cleared = compute_dim0(edges, births, n, threshold)
    stats["time_dim0_s"] = time.perf_counter() - t0

    backend = resolve_backend(params.backend)
    stats["backend"] = backend.name
    stats["n_points"] = n
    stats["max_dim"] = D
    stats["modulus"] = params.modulus
    stats["threads"] = params.threads
    stats["collapse"] = params.collapse

    bars_by_dim = [bars0] + [[] for _ in range(D)]
    opts = {"apparent": params.apparent, "clearing": params.clearing}

    t0 = time.perf_counter()
    if D >= 1 and n >= 2 and edges:
        if graph is not None:
            ctx = backend.make_ctx(graph=graph, binom=binom, threshold=threshold,
                                   modulus=params.modulus, inv=field.inverses)
        else:
            ctx = backend.make_ctx(data=src, binom=binom, threshold=threshold,
                                   modulus=params.modulus, inv=field.inverses)
        pool = WorkPool(params.threads, pin=params.pin)
        try:
            simp = backend.dim1(ctx, edges)
            cleared_b = backend.make_cleared(cleared)
            for d in range(1, D + 1):
                t_d = time.perf_counter()
                pairs, essential, cleared_next, counters = backend.reduce_dimension(
                    ctx, d, simp, cleared_b, pool, opts
                )
                bars_by_dim[d] = [(b, e) for b, e, _, _ in pairs]
                bars_by_dim[d] += [(b, INF) for b, _ in essential]
                for key in ("columns", "cleared", "apparent", "bars",
                            "essential", "zero_pairs"):
                    stats[f"dim{d}_{key}"] = counters[key]
                stats[f"time_dim{d}_s"] = time.perf_counter() - t_d
                if d < D:
                    simp = backend.assemble_next(ctx, simp, d)
                    cleared_b = cleared_next
        finally:
            pool.close()
    stats["time_reduce_s"] = time.perf_counter() - t0
    stats["time_total_s"] = time.perf_counter() - t_total

    return PipelineReport(barcode=Barcode.from_pairs(bars_by_dim), stats=stats)
