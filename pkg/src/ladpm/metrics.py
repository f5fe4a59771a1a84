"""Desk-scale sample-quality measures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from .errors import ConfigError
from .oracle import GmmTarget


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Samples of shape (n, d) plus a free-form provenance record."""

    samples: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0:
            raise ConfigError("a SampleSet needs a non-empty (n, d) array")
        object.__setattr__(self, "samples", x)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]


def _values(a) -> np.ndarray:
    return a.samples if isinstance(a, SampleSet) else np.atleast_2d(np.asarray(a, dtype=np.float64).T).T


def _w1_sorted(x: np.ndarray, y: np.ndarray) -> float:
    if x.size == y.size:
        return float(np.mean(np.abs(np.sort(x) - np.sort(y))))
    return float(stats.wasserstein_distance(x, y))


def wasserstein1_1d(a, b) -> float:
    """W1 distance between two one-dimensional sample sets.

    Equal sizes use the sorted matching directly; otherwise the empirical
    quantile functions are compared.
    """
    x, y = _values(a), _values(b)
    if x.shape[1] != 1 or y.shape[1] != 1:
        raise ConfigError("wasserstein1_1d needs one-dimensional samples")
    return _w1_sorted(x[:, 0], y[:, 0])


def sliced_wasserstein(a, b, projections: int = 128, rng: np.random.Generator | int = 0) -> float:
    """Mean W1 over random unit-direction projections."""
    x, y = _values(a), _values(b)
    if x.shape[1] != y.shape[1]:
        raise ConfigError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[1] == 1:
        return wasserstein1_1d(x, y)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    dirs = rng.standard_normal((projections, x.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    px, py = x @ dirs.T, y @ dirs.T
    return float(np.mean([_w1_sorted(px[:, k], py[:, k]) for k in range(projections)]))


def moment_report(a, target: GmmTarget) -> dict[str, np.ndarray]:
    """Sample mean and variance (ddof=0) minus the mixture's closed-form moments."""
    x = _values(a)
    if x.shape[1] != target.dim:
        raise ConfigError(f"dimension mismatch: samples {x.shape[1]}, target {target.dim}")
    return {
        "mean_error": x.mean(axis=0) - target.mean(),
        "variance_error": x.var(axis=0) - target.variance(),
    }
