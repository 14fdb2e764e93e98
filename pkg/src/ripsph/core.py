"""Shared domain types, input validation and prime-field arithmetic.

Everything defined here is immutable after construction and safe to share
across threads without synchronization.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

UINT64_MAX = 2**64 - 1

# Relative tolerance for the dense symmetry check.  Strict equality would
# reject legitimately round-tripped files.
SYMMETRY_RTOL = 1e-12


class EngineError(Exception):
    """Base class for all engine errors; str(exc) is the user-facing message."""


class AsymmetricMatrix(EngineError):
    pass


class NonFiniteEntry(EngineError):
    pass


class DuplicateEdge(EngineError):
    pass


class NotPrime(EngineError):
    pass


class IndexOverflow(EngineError):
    pass


class RankOutOfRange(EngineError):
    pass


class KTooLarge(EngineError):
    pass


class UnsupportedMixExponent(EngineError):
    pass


class NonTriangularCount(EngineError):
    pass


class RaggedRows(EngineError):
    pass


class ParseError(EngineError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (
                f", column {column}: " if column is not None else ": "
            ) + message
        super().__init__(message)


class FilteredEdge(NamedTuple):
    """Weighted undirected edge, canonically oriented u < v."""

    u: int
    v: int
    weight: float


class DistanceInput:
    """Ground data of the filtration.

    Either a dense symmetric matrix whose diagonal holds vertex birth values,
    or a sparse weighted graph where absent pairs have filtration value +inf.
    Use the :meth:`dense` / :meth:`sparse` constructors, then
    :func:`validate_input`.
    """

    __slots__ = ("kind", "n", "values", "edges", "vertex_births", "_validated")

    def __init__(self, kind, n, values, edges, vertex_births):
        self.kind = kind
        self.n = n
        self.values = values
        self.edges = edges
        self.vertex_births = vertex_births
        self._validated = False

    @classmethod
    def dense(cls, values) -> "DistanceInput":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("dense input must be a square 2-d matrix")
        n = values.shape[0]
        births = np.diagonal(values).copy()
        return cls("dense", n, values, None, births)

    @classmethod
    def sparse(cls, n, edges, vertex_births=None) -> "DistanceInput":
        if vertex_births is None:
            vertex_births = np.zeros(n, dtype=np.float64)
        else:
            vertex_births = np.asarray(vertex_births, dtype=np.float64)
            if vertex_births.shape != (n,):
                raise ValueError("vertex_births must have length n")
        edges = [FilteredEdge(int(u), int(v), float(w)) for (u, v, w) in edges]
        return cls("sparse", n, None, edges, vertex_births)

    @property
    def is_dense(self):
        return self.kind == "dense"

    def __eq__(self, other):
        if not isinstance(other, DistanceInput) or self.kind != other.kind:
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.vertex_births, other.vertex_births):
            return False
        if self.is_dense:
            return np.array_equal(self.values, other.values)
        return self.edges == other.edges


def validate_input(raw: DistanceInput) -> DistanceInput:
    """Check the invariants of a :class:`DistanceInput` and canonicalize it.

    Dense matrices must be finite and symmetric (within ``SYMMETRY_RTOL``
    relative tolerance); the upper triangle wins when mirroring, so the
    result is exactly symmetric.  Sparse edge lists are reoriented to u < v
    and sorted; a repeated unordered pair raises :class:`DuplicateEdge`.
    Idempotent: ``validate_input(validate_input(x)) == validate_input(x)``.
    """
    if raw._validated:
        return raw
    if raw.is_dense:
        values = raw.values
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteEntry(f"non-finite entry at ({i}, {j})")
        if not np.allclose(values, values.T, rtol=SYMMETRY_RTOL, atol=0.0):
            bad = np.argwhere(
                ~np.isclose(values, values.T, rtol=SYMMETRY_RTOL, atol=0.0)
            )[0]
            i, j = int(bad[0]), int(bad[1])
            raise AsymmetricMatrix(
                f"values[{i}][{j}]={values[i, j]!r} != values[{j}][{i}]={values[j, i]!r}"
            )
        sym = np.triu(values) + np.triu(values, 1).T
        out = DistanceInput("dense", raw.n, sym, None, np.diagonal(sym).copy())
        out._validated = True
        return out

    if not np.all(np.isfinite(raw.vertex_births)):
        raise NonFiniteEntry("non-finite vertex birth")
    seen = set()
    edges = []
    for e in raw.edges:
        u, v, w = e
        if u == v:
            raise DuplicateEdge(f"self edge ({u}, {v}) not allowed; use vertex_births")
        if not (0 <= u < raw.n and 0 <= v < raw.n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={raw.n}")
        if not math.isfinite(w):
            raise NonFiniteEntry(f"non-finite weight on edge ({u}, {v})")
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            raise DuplicateEdge(f"edge ({u}, {v}) given more than once")
        seen.add((u, v))
        edges.append(FilteredEdge(u, v, w))
    edges.sort(key=lambda e: (e.u, e.v))
    out = DistanceInput("sparse", raw.n, None, edges, raw.vertex_births.copy())
    out._validated = True
    return out


def is_prime(p) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class FieldTable:
    """Multiplicative inverses modulo a prime p < 2**16."""

    p: int
    inverses: Tuple[int, ...]

    def inv(self, a):
        return self.inverses[a]


def build_field_table(p: int) -> FieldTable:
    """Inverse table for Z/pZ; raises :class:`NotPrime` for invalid moduli."""
    if not is_prime(p):
        raise NotPrime(f"modulus {p} is not prime")
    if p >= 2**16:
        raise NotPrime(f"modulus {p} exceeds the supported bound 2**16")
    inverses = [0] * p
    for a in range(1, p):
        inverses[a] = pow(a, p - 2, p)
    return FieldTable(p, tuple(inverses))


@dataclass(frozen=True, order=True)
class PersistenceBar:
    """One persistence interval [birth, death), death may be +inf."""

    dimension: int
    birth: float
    death: float

    def __post_init__(self):
        if not self.death > self.birth:
            raise ValueError(f"bar must have death > birth, got {self}")


class Barcode:
    """Bars grouped by dimension 0..D, canonically sorted by (birth, death)."""

    __slots__ = ("groups",)

    def __init__(self, groups: Sequence[Sequence[PersistenceBar]]):
        self.groups = tuple(
            tuple(sorted(g, key=lambda b: (b.birth, b.death))) for g in groups
        )

    @classmethod
    def from_pairs(cls, pairs_by_dim) -> "Barcode":
        """Build from per-dimension lists of (birth, death) pairs."""
        groups = []
        for d, pairs in enumerate(pairs_by_dim):
            groups.append([PersistenceBar(d, float(b), float(e)) for b, e in pairs])
        return cls(groups)

    @property
    def max_dim(self):
        return len(self.groups) - 1

    def bars(self, dim) -> Tuple[PersistenceBar, ...]:
        return self.groups[dim] if dim < len(self.groups) else ()

    def pairs(self, dim):
        return [(b.birth, b.death) for b in self.bars(dim)]

    def rows(self):
        """Flat (dimension, birth, death) rows in canonical order."""
        return [(b.dimension, b.birth, b.death) for g in self.groups for b in g]

    def __eq__(self, other):
        if not isinstance(other, Barcode):
            return NotImplemented
        return self.groups == other.groups

    def __repr__(self):
        counts = ", ".join(f"H{d}:{len(g)}" for d, g in enumerate(self.groups))
        return f"<Barcode {counts}>"


def default_threads() -> int:
    return os.cpu_count() or 1


DTM_MODE_VR = "vr"
DTM_MODE_STRICT = "strict"


@dataclass(frozen=True)
class DTMWeighting:
    """Distance-to-measure re-weighting parameters.

    ``k`` nearest neighbours (self excluded, capped at n-1), exponent ``r``,
    and mixing exponent ``p_mix`` in {1, 2, inf}.  ``mode`` selects the edge
    rule convention: "vr" (default) reduces to the classical filtration when
    all weights are zero; "strict" follows the two-ball intersection radius.
    """

    k: int = 10
    r: float = 2.0
    p_mix: float = 1
    mode: str = DTM_MODE_VR


@dataclass(frozen=True)
class ExplicitWeighting:
    """User-supplied vertex weights with the same mixing rule as DTM."""

    weights: Tuple[float, ...]
    p_mix: float = 1
    mode: str = DTM_MODE_VR

    def __init__(self, weights, p_mix=1, mode=DTM_MODE_VR):
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))
        object.__setattr__(self, "p_mix", p_mix)
        object.__setattr__(self, "mode", mode)


Weighting = Union[None, DTMWeighting, ExplicitWeighting]


@dataclass(frozen=True)
class ComputeParams:
    """Knobs of a persistence computation.

    ``threshold=None`` means Auto: the enclosing radius for dense inputs,
    +inf for sparse ones.  ``apparent`` and ``clearing`` toggle the two
    reduction optimizations; both are output-neutral and default to on.
    """

    max_dim: int = 1
    threshold: Optional[float] = None
    modulus: int = 2
    threads: Optional[int] = None
    collapse: bool = False
    weighting: Weighting = None
    pin: bool = False
    apparent: bool = True
    clearing: bool = True
    backend: Optional[str] = None

    def validated(self) -> "ComputeParams":
        if self.max_dim < 0:
            raise ValueError(f"max_dim must be >= 0, got {self.max_dim}")
        if not is_prime(self.modulus) or self.modulus >= 2**16:
            raise NotPrime(f"modulus {self.modulus} is not a supported prime")
        threads = self.threads if self.threads is not None else default_threads()
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        threshold = self.threshold
        if threshold is not None:
            threshold = float(threshold)
            if math.isnan(threshold):
                raise ValueError("threshold must not be NaN")
        if isinstance(self.weighting, DTMWeighting):
            w = self.weighting
            if w.r <= 0:
                raise ValueError(f"DTM exponent r must be positive, got {w.r}")
            if w.p_mix not in (1, 2, math.inf):
                raise UnsupportedMixExponent(f"p_mix must be 1, 2 or inf, got {w.p_mix}")
            if w.mode not in (DTM_MODE_VR, DTM_MODE_STRICT):
                raise ValueError(f"unknown weighting mode {w.mode!r}")
        return ComputeParams(
            max_dim=self.max_dim,
            threshold=threshold,
            modulus=self.modulus,
            threads=threads,
            collapse=self.collapse,
            weighting=self.weighting,
            pin=self.pin,
            apparent=self.apparent,
            clearing=self.clearing,
            backend=self.backend,
        )
