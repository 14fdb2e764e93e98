import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ripsph import ComputeParams, DistanceInput, compute_persistence
from ripsph.backend import available_backends


def random_symmetric(rng, n):
    """Symmetric U[0,1] distance matrix with zero diagonal."""
    a = rng.random((n, n))
    m = np.triu(a, 1)
    return m + m.T


def engine_pairs(data, max_dim=1, **kw):
    """Per-dimension sorted (birth, death) lists from the engine."""
    if isinstance(data, np.ndarray) and data.shape[0] == data.shape[1]:
        data = DistanceInput.dense(data)
    params = ComputeParams(max_dim=max_dim, **kw)
    report = compute_persistence(data, params)
    return [report.barcode.pairs(d) for d in range(max_dim + 1)]


def circle_points(n, radius=1.0):
    angles = 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def circle_metric(n):
    """Exact chord-length matrix of n evenly spaced points on the unit circle."""
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            steps = min(j - i, n - (j - i))
            m[i, j] = m[j, i] = 2 * np.sin(np.pi * steps / n)
    return m


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param
