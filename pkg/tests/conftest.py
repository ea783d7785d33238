"""Shared fixtures: small datasets exercising every column kind."""

from __future__ import annotations

import numpy as np
import pytest

from qcad.dataset import (
    KIND_CATEGORICAL,
    KIND_NUMERIC,
    ROLE_BEHAVIORAL,
    ROLE_CONTEXTUAL,
    Dataset,
    Feature,
    FeatureSchema,
    label_encode,
    minmax_normalize,
)


def make_mixed_dataset(
    n: int,
    n_numeric_ctx: int = 2,
    n_categorical_ctx: int = 1,
    n_behavioral: int = 2,
    seed: int = 0,
    n_codes: int = 4,
    normalized: bool = True,
) -> Dataset:
    """Random mixed-type dataset for tests; values are generic floats."""
    rng = np.random.default_rng(seed)
    features = []
    columns: dict[str, np.ndarray] = {}
    cat_labels: dict[str, tuple[str, ...]] = {}
    for i in range(n_numeric_ctx):
        name = f"num{i}"
        features.append(Feature(name, ROLE_CONTEXTUAL, KIND_NUMERIC))
        columns[name] = rng.normal(size=n)
    for i in range(n_categorical_ctx):
        name = f"cat{i}"
        features.append(Feature(name, ROLE_CONTEXTUAL, KIND_CATEGORICAL))
        raw = [f"v{rng.integers(n_codes)}" for _ in range(n)]
        codes, mapping = label_encode(raw)
        columns[name] = codes
        cat_labels[name] = mapping
    for i in range(n_behavioral):
        name = f"beh{i}"
        features.append(Feature(name, ROLE_BEHAVIORAL, KIND_NUMERIC))
        columns[name] = rng.random(n) * 3.0 - 1.0
    ds = Dataset(schema=FeatureSchema(tuple(features)), columns=columns, cat_labels=cat_labels)
    return minmax_normalize(ds) if normalized else ds


@pytest.fixture
def mixed_ds() -> Dataset:
    return make_mixed_dataset(30, seed=3)


@pytest.fixture
def raw_mixed_ds() -> Dataset:
    return make_mixed_dataset(30, seed=3, normalized=False)
