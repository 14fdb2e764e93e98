"""ripsph: parallel persistent homology of Vietoris-Rips and flag filtrations.

Pipeline: enclosing-radius thresholding -> optional edge collapse ->
lock-free parallel cohomology reduction with clearing and apparent pairs.
"""

__version__ = "0.1.0"

from .core import (
    Barcode,
    ComputeParams,
    DistanceInput,
    DTMWeighting,
    EngineError,
    ExplicitWeighting,
    FilteredEdge,
    PersistenceBar,
    build_field_table,
    validate_input,
)
from .engine import PipelineReport, compute_persistence, point_cloud_distances
from .backend import available_backends, compiled_available

__all__ = [
    "Barcode",
    "ComputeParams",
    "DistanceInput",
    "DTMWeighting",
    "EngineError",
    "ExplicitWeighting",
    "FilteredEdge",
    "PersistenceBar",
    "PipelineReport",
    "available_backends",
    "build_field_table",
    "compiled_available",
    "compute_persistence",
    "point_cloud_distances",
    "validate_input",
    "__version__",
]
