"""Synthetic benchmark generation and ground-truth anomaly injection.

Contextual columns are drawn from per-feature five-component Gaussian
mixtures (integer-valued for categorical features). Behavioral columns
depend on the contextual block through one of five dependency schemes
(linear, cubic, sine, log, or their combination) with sparse random
coefficients plus small uniform noise. Anomalies are injected after
min-max scaling by shifting every behavioral value of selected rows by a
random amount in +/-[0.1, 0.5], deliberately left untruncated.

All draws come from named SplitMix64 sub-streams (see :mod:`qcad._rng`), so
generated datasets are reproducible across runs and platforms:

* stream ``(seed, 1, p)``: contextual feature p (centroids, assignments, noise)
* stream ``(seed, 2, q)``: dependency coefficients of behavioral feature q
* stream ``(seed, 3, q)``: additive noise of behavioral feature q
* stream ``(seed, 4)``: anomaly injection (row choice, signs, magnitudes)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._rng import SplitMix64, mix_seed
from .dataset import (
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

SCHEMES = ("s1", "s2", "s3", "s4", "s5")

_N_CLUSTERS = 5
_CAT_CENTROID_RANGE = 11  # centroids drawn from {0, ..., 10}
_NOISE_SCALE = 0.05
_ZERO_PROB = 1.0 / 3.0


@dataclass(frozen=True)
class SchemeSpec:
    """Recipe for one synthetic dataset."""

    scheme: str
    n_contextual: int
    n_categorical: int
    n_behavioral: int
    n_samples: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.n_contextual < 1:
            raise ValueError("need at least one contextual feature")
        if not 0 <= self.n_categorical <= self.n_contextual:
            raise ValueError("n_categorical must be between 0 and n_contextual")
        if self.n_behavioral < 1:
            raise ValueError("need at least one behavioral feature")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class InjectionRecord:
    """Which rows were perturbed and by how much, per behavioral feature."""

    indices: np.ndarray
    deltas: np.ndarray
    features: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "indices": [int(i) for i in self.indices],
            "features": list(self.features),
            "deltas": [[float(d) for d in row] for row in self.deltas],
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")


def _cluster_sigma(centroids: np.ndarray) -> float:
    """A quarter of the mean pairwise absolute distance between centroids."""
    diffs = [
        abs(float(centroids[i]) - float(centroids[j]))
        for i in range(len(centroids))
        for j in range(i + 1, len(centroids))
    ]
    return 0.25 * sum(diffs) / len(diffs)


def gen_contextual(spec: SchemeSpec) -> tuple[list[np.ndarray], list[bool]]:
    """Per-feature mixture samples; returns (columns, is_categorical flags).

    Numeric features come first, then the categorical ones. Categorical
    draws are rounded to the nearest integer and clamped at zero so the
    values remain valid category identifiers.
    """
    columns: list[np.ndarray] = []
    flags: list[bool] = []
    n = spec.n_samples
    for p in range(spec.n_contextual):
        categorical = p >= spec.n_contextual - spec.n_categorical
        rng = SplitMix64(mix_seed(spec.seed, 1, p))
        if categorical:
            centroids = rng.integers_below(_CAT_CENTROID_RANGE, _N_CLUSTERS).astype(np.float64)
        else:
            centroids = rng.uniform(_N_CLUSTERS)
        sigma = _cluster_sigma(centroids)
        assign = rng.integers_below(_N_CLUSTERS, n)
        values = centroids[assign] + sigma * rng.normal(n)
        if categorical:
            values = np.maximum(np.rint(values), 0.0)
        columns.append(values)
        flags.append(categorical)
    return columns, flags


def _draw_coefficients(rng: SplitMix64, count: int) -> np.ndarray:
    """Uniform(0,1) coefficients, each independently zeroed with prob 1/3."""
    values = rng.uniform(count)
    zeroed = rng.uniform(count) < _ZERO_PROB
    values = values.copy()
    values[zeroed] = 0.0
    return values


_TERMS = {
    "s1": (lambda c: c,),
    "s2": (lambda c: c ** 3,),
    "s3": (np.sin,),
    "s4": (lambda c: np.log1p(np.abs(c)),),
    "s5": (lambda c: c, lambda c: c ** 3, np.sin, lambda c: np.log1p(np.abs(c))),
}


def scheme_terms(scheme: str, ctx_columns: list[np.ndarray],
                 coeffs: list[np.ndarray]) -> np.ndarray:
    """Deterministic part of one behavioral column given drawn coefficients.

    ``coeffs`` holds one array per term of the scheme; entry p multiplies
    the transformed contextual column p.
    """
    terms = _TERMS[scheme]
    if len(coeffs) != len(terms):
        raise ValueError(f"scheme {scheme} takes {len(terms)} coefficient sets")
    n = ctx_columns[0].shape[0]
    out = np.zeros(n)
    for term, coeff in zip(terms, coeffs):
        for p, c in enumerate(coeff):
            out += c * term(ctx_columns[p])
    return out


def gen_behavioral(
    scheme: str,
    ctx_columns: list[np.ndarray],
    n_behavioral: int,
    seed: int,
) -> tuple[list[np.ndarray], list[list[np.ndarray]]]:
    """Behavioral columns under the given dependency scheme.

    The dependency sums over the first ``min(P, Q)`` contextual columns.
    Returns the columns and the drawn coefficient sets per feature so the
    construction can be re-evaluated externally.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n = ctx_columns[0].shape[0]
    p_eff = min(len(ctx_columns), n_behavioral)
    used = ctx_columns[:p_eff]
    columns = []
    all_coeffs = []
    for q in range(n_behavioral):
        coeff_rng = SplitMix64(mix_seed(seed, 2, q))
        coeffs = [_draw_coefficients(coeff_rng, p_eff) for _ in _TERMS[scheme]]
        noise_rng = SplitMix64(mix_seed(seed, 3, q))
        noise = _NOISE_SCALE * noise_rng.uniform(n)
        columns.append(scheme_terms(scheme, used, coeffs) + noise)
        all_coeffs.append(coeffs)
    return columns, all_coeffs


def make_synthetic(spec: SchemeSpec) -> Dataset:
    """Assemble and min-max normalize a synthetic dataset.

    Categorical contextual samples are label-encoded in first-appearance
    order, matching how a CSV of the same data would load.
    """
    ctx_cols, cat_flags = gen_contextual(spec)
    beh_cols, _ = gen_behavioral(spec.scheme, ctx_cols, spec.n_behavioral, spec.seed)

    features = []
    columns: dict[str, np.ndarray] = {}
    cat_labels: dict[str, tuple[str, ...]] = {}
    for p, (col, categorical) in enumerate(zip(ctx_cols, cat_flags)):
        name = f"ctx{p + 1}"
        if categorical:
            features.append(Feature(name, ROLE_CONTEXTUAL, KIND_CATEGORICAL))
            codes, mapping = label_encode([str(int(v)) for v in col])
            columns[name] = codes
            cat_labels[name] = mapping
        else:
            features.append(Feature(name, ROLE_CONTEXTUAL, KIND_NUMERIC))
            columns[name] = col
    for q, col in enumerate(beh_cols):
        name = f"beh{q + 1}"
        features.append(Feature(name, ROLE_BEHAVIORAL, KIND_NUMERIC))
        columns[name] = col

    ds = Dataset(schema=FeatureSchema(tuple(features)), columns=columns, cat_labels=cat_labels)
    return minmax_normalize(ds)


def inject_anomalies(ds: Dataset, m: int, seed: int) -> tuple[Dataset, InjectionRecord]:
    """Perturb m random rows in every behavioral feature.

    Each delta has a uniform sign and a magnitude uniform on [0.1, 0.5];
    perturbed values are not clipped back into [0, 1], so extreme values
    can occur. Contextual columns are untouched. Labels mark the
    perturbed rows.
    """
    if not 0 < m < ds.n:
        raise ValueError(f"anomaly count m={m} must be in (0, {ds.n})")
    if not ds.normalized:
        raise ValueError("inject_anomalies expects a min-max normalized dataset")
    rng = SplitMix64(mix_seed(seed, 4))
    indices = rng.choice_without_replacement(ds.n, m)
    names = tuple(f.name for f in ds.schema.behavioral)
    q = len(names)
    signs = np.where(rng.uniform(m * q) < 0.5, -1.0, 1.0)
    mags = 0.1 + 0.4 * rng.uniform(m * q)
    deltas = (signs * mags).reshape(m, q)

    columns = dict(ds.columns)
    for col_idx, name in enumerate(names):
        col = ds.columns[name].copy()
        col[indices] += deltas[:, col_idx]
        columns[name] = col
    labels = np.zeros(ds.n, dtype=bool)
    labels[indices] = True

    order = np.argsort(indices, kind="stable")
    record = InjectionRecord(
        indices=indices[order].copy(),
        deltas=deltas[order].copy(),
        features=names,
    )
    injected = replace(ds, columns=columns, labels=labels)
    return injected, record
