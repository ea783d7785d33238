"""Gower distance on contextual features and reference-group lookup.

Distances average per-feature partial similarities: range-scaled absolute
difference for numeric features, an equality indicator for categorical ones.
Values always land in [0, 1]. Each object's reference group is its k nearest
neighbours under this distance, excluding the object itself so its own
behavioral values never train the model that scores it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import KIND_CATEGORICAL, Dataset

_CACHE_HEADER = struct.Struct("<Q")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise contextual distances with zero diagonal."""

    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.n, self.n):
            raise ValueError(f"expected {self.n}x{self.n} matrix, got {self.values.shape}")
        self.values.setflags(write=False)


@dataclass(frozen=True)
class ReferenceGroup:
    """Nearest-first neighbour indices for one object (self excluded)."""

    center: int
    members: np.ndarray

    def __post_init__(self) -> None:
        self.members.setflags(write=False)


def contextual_ranges(ds: Dataset) -> dict[str, tuple[float, float]]:
    """(min, max) of every numeric contextual column over the full dataset."""
    out = {}
    for f in ds.schema.contextual:
        if f.kind != KIND_CATEGORICAL:
            col = ds.columns[f.name]
            out[f.name] = (float(col.min()), float(col.max()))
    return out


def gower_distance(
    i: int,
    j: int,
    ds: Dataset,
    ranges: dict[str, tuple[float, float]],
) -> float:
    """Distance between objects i and j over the contextual features.

    A numeric feature whose range is zero contributes full similarity: all
    observed values coincide, so no pair can be told apart on it.
    """
    contextual = ds.schema.contextual
    total = 0.0
    for f in contextual:
        col = ds.columns[f.name]
        if f.kind == KIND_CATEGORICAL:
            ps = 1.0 if col[i] == col[j] else 0.0
        else:
            lo, hi = ranges[f.name]
            width = hi - lo
            if width == 0.0:
                ps = 1.0
            else:
                ps = 1.0 - abs(col[i] - col[j]) / width
        total += ps
    return 1.0 - total / len(contextual)


def distance_matrix(ds: Dataset) -> DistanceMatrix:
    """All-pairs Gower distances on the contextual columns.

    Vectorised per feature, accumulating partial similarities in schema
    order, so entries match the scalar :func:`gower_distance` bit for bit.
    """
    if ds.n < 2:
        raise ValueError("distance matrix needs at least two objects")
    contextual = ds.schema.contextual
    ranges = contextual_ranges(ds)
    sims = np.zeros((ds.n, ds.n))
    for f in contextual:
        col = ds.columns[f.name]
        if f.kind == KIND_CATEGORICAL:
            ps = (col[:, None] == col[None, :]).astype(np.float64)
        else:
            lo, hi = ranges[f.name]
            width = hi - lo
            if width == 0.0:
                ps = np.ones((ds.n, ds.n))
            else:
                ps = 1.0 - np.abs(col[:, None] - col[None, :]) / width
        sims += ps
    values = 1.0 - sims / len(contextual)
    return DistanceMatrix(n=ds.n, values=values)


def reference_group(m: DistanceMatrix, i: int, k: int) -> ReferenceGroup:
    """The k nearest neighbours of object i, nearest first.

    Ties are broken by ascending index so results are deterministic.
    """
    if not 0 <= i < m.n:
        raise ValueError(f"object index {i} out of range for n={m.n}")
    if not 1 <= k <= m.n - 1:
        raise ValueError(f"neighbour count k={k} must be in [1, {m.n - 1}]")
    order = np.argsort(m.values[i], kind="stable")
    members = order[order != i][:k]
    return ReferenceGroup(center=i, members=members.astype(np.int64))


def save_distance_matrix(m: DistanceMatrix, path: str | Path) -> None:
    """Binary cache: 8-byte little-endian count, then row-major float64."""
    with Path(path).open("wb") as fh:
        fh.write(_CACHE_HEADER.pack(m.n))
        fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    data = Path(path).read_bytes()
    if len(data) < _CACHE_HEADER.size:
        raise ValueError(f"{path}: truncated distance cache")
    (n,) = _CACHE_HEADER.unpack_from(data)
    expected = _CACHE_HEADER.size + 8 * n * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for n={n}, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_CACHE_HEADER.size)
    return DistanceMatrix(n=int(n), values=values.reshape(n, n).astype(np.float64))
