"""File formats: lower-distance matrices, point clouds, sparse graphs and
barcode output.  Reals are printed with 17 significant digits so every value
round-trips exactly."""

from __future__ import annotations

import math
import re
from typing import List, TextIO, Union

import numpy as np

from .core import (
    DistanceInput,
    DuplicateEdge,
    NonTriangularCount,
    ParseError,
    RaggedRows,
)
from .engine import PipelineReport, point_cloud_distances
from .filtration import WeightedGraph

_TOKEN = re.compile(r"[^\s,]+")


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    return format(x, ".17g")


def _tokens(stream):
    """(line_no, col_no, text) for each comma/whitespace separated token."""
    for line_no, line in enumerate(stream, start=1):
        for m in _TOKEN.finditer(line):
            yield line_no, m.start() + 1, m.group()


def _parse_float(text, line, col):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, col) from None


def read_lower_distance_matrix(stream: TextIO) -> DistanceInput:
    """Strictly lower-triangular distances in row order; k(k-1)/2 values
    imply k points; the diagonal is zero."""
    values = [
        _parse_float(text, line, col) for line, col, text in _tokens(stream)
    ]
    m = len(values)
    n = round((1 + math.isqrt(1 + 8 * m)) / 2)
    if n * (n - 1) // 2 != m:
        raise NonTriangularCount(
            f"{m} values is not a triangular number; cannot infer point count"
        )
    n = max(n, 1)
    mat = np.zeros((n, n), dtype=np.float64)
    it = iter(values)
    for i in range(1, n):
        for j in range(i):
            mat[i, j] = mat[j, i] = next(it)
    return DistanceInput.dense(mat)


def read_point_cloud(stream: TextIO) -> DistanceInput:
    """Rows of equal arity -> dense Euclidean distance matrix, zero diagonal."""
    rows: List[List[float]] = []
    for line_no, line in enumerate(stream, start=1):
        toks = list(_TOKEN.finditer(line))
        if not toks:
            continue
        row = [_parse_float(m.group(), line_no, m.start() + 1) for m in toks]
        if rows and len(row) != len(rows[0]):
            raise RaggedRows(
                f"row {line_no} has {len(row)} values, expected {len(rows[0])}"
            )
        rows.append(row)
    if not rows:
        raise ParseError("empty point cloud")
    return point_cloud_distances(np.asarray(rows, dtype=np.float64))


def read_sparse_graph(stream: TextIO) -> DistanceInput:
    """Lines "i j w"; "i i w" sets the birth of vertex i.  The vertex count
    is 1 + the largest id; absent pairs are +inf, absent births 0."""
    births = {}
    edges = {}
    max_id = -1
    for line_no, line in enumerate(stream, start=1):
        toks = list(_TOKEN.finditer(line))
        if not toks:
            continue
        if len(toks) != 3:
            raise ParseError(
                f"expected 'i j w', got {len(toks)} fields", line_no, toks[0].start() + 1
            )
        raw_i, raw_j, raw_w = (m.group() for m in toks)
        try:
            i, j = int(raw_i), int(raw_j)
        except ValueError:
            raise ParseError(
                f"expected integer vertex ids, got {raw_i!r} {raw_j!r}", line_no,
                toks[0].start() + 1,
            ) from None
        if i < 0 or j < 0:
            raise ParseError("vertex ids must be non-negative", line_no,
                             toks[0].start() + 1)
        w = _parse_float(raw_w, line_no, toks[2].start() + 1)
        max_id = max(max_id, i, j)
        if i == j:
            if i in births:
                raise DuplicateEdge(f"birth of vertex {i} given more than once")
            births[i] = w
        else:
            key = (min(i, j), max(i, j))
            if key in edges:
                raise DuplicateEdge(f"edge {key} given more than once")
            edges[key] = w
    n = max_id + 1
    birth_list = [births.get(i, 0.0) for i in range(n)]
    return DistanceInput.sparse(
        n, [(u, v, w) for (u, v), w in sorted(edges.items())], birth_list
    )


def write_barcode(report: Union[PipelineReport, "Barcode"], stream: TextIO,
                  fmt: str = "csv") -> None:
    """csv: header dimension,birth,death with death literal ``inf`` for
    essential bars; human: per-dimension interval sections."""
    barcode = report.barcode if isinstance(report, PipelineReport) else report
    if fmt == "csv":
        stream.write("dimension,birth,death\n")
        for d, b, e in barcode.rows():
            stream.write(f"{d},{_fmt(b)},{_fmt(e)}\n")
    elif fmt == "human":
        for d in range(barcode.max_dim + 1):
            stream.write(f"persistence intervals in dim {d}:\n")
            for bar in barcode.bars(d):
                stream.write(f" [{_fmt(bar.birth)}, {_fmt(bar.death)})\n")
    else:
        raise ValueError(f"unknown barcode format {fmt!r}")


def write_sparse_graph(graph: Union[DistanceInput, WeightedGraph],
                       stream: TextIO) -> None:
    """Inverse of :func:`read_sparse_graph`, 17-digit round-trippable."""
    if isinstance(graph, WeightedGraph):
        n, births, edges = graph.n, graph.vertex_births, graph.edges
    else:
        if graph.is_dense:
            raise ValueError("write_sparse_graph needs a sparse graph")
        n, births, edges = graph.n, graph.vertex_births, graph.edges
    touched = set()
    for u, v, _ in edges:
        touched.add(u)
        touched.add(v)
    for i in range(n):
        b = float(births[i])
        # birth lines keep non-zero births and pin down isolated vertices
        if b != 0.0 or (i == n - 1 and i not in touched):
            stream.write(f"{i} {i} {_fmt(b)}\n")
    for u, v, w in edges:
        stream.write(f"{u} {v} {_fmt(w)}\n")
