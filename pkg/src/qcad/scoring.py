"""Conditional-percentile anomaly scoring.

For each object, a quantile regression forest is fitted per behavioral
feature on the object's reference group (contextual columns as predictors,
the behavioral column as response). The estimated conditional percentile
grid turns into a score: the width of the percentile interval the object's
value falls into acts as inverse local density, values outside the grid are
extrapolated by their IQR-scaled distance times the widest interval, and
partial scores are clipped at ``eta / 100`` so a single wildly deviating
feature cannot dominate the mean over features that forms the final score.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import mix_seed
from .dataset import Dataset
from .gower import DistanceMatrix, ReferenceGroup, distance_matrix, reference_group
from .qrf import ForestParams, fit_forest

#: Floor for the inter-quartile range in the out-of-support branches, so a
#: degenerate (constant) profile still yields a large finite score.
IQR_FLOOR = 1e-6


class ScoringError(RuntimeError):
    """Raised when scoring an object fails; carries the object index."""


@dataclass(frozen=True)
class PercentileProfile:
    """Estimated conditional quantile grid for one object and feature.

    ``taus[i]`` is the conditional quantile at level ``i / n_intervals``;
    ``widths[i] = taus[i+1] - taus[i]``. The IQR is read at the grid points
    closest to levels 0.25 and 0.75 (exact for the default 100-interval grid).
    """

    taus: np.ndarray

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=np.float64)
        if taus.ndim != 1 or taus.size < 2:
            raise ValueError("profile needs at least two grid points")
        if np.any(np.diff(taus) < 0):
            raise ValueError("profile grid must be non-decreasing")
        object.__setattr__(self, "taus", taus)
        taus.setflags(write=False)

    @property
    def n_intervals(self) -> int:
        return self.taus.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.taus)

    @property
    def iqr(self) -> float:
        n = self.n_intervals
        lo = int(round(0.25 * n))
        hi = int(round(0.75 * n))
        return float(self.taus[hi] - self.taus[lo])

    @property
    def max_width(self) -> float:
        return float(self.widths.max())


def percentile_profile(forest, u: np.ndarray, n_quantiles: int = 100) -> PercentileProfile:
    """Profile of conditional quantiles at levels i / n_quantiles, i = 0..n_quantiles."""
    if n_quantiles < 1:
        raise ValueError("n_quantiles must be >= 1")
    alphas = np.arange(n_quantiles + 1) / n_quantiles
    return PercentileProfile(taus=forest.conditional_quantiles(u, alphas))


def matched_width(p: PercentileProfile, b: float) -> float:
    """Width of the grid interval containing b.

    Uses the largest index i with ``taus[i] <= b``, capped at the last
    interval so ``b == taus[-1]`` matches it; deterministic under
    duplicate grid values. b must lie inside [taus[0], taus[-1]].
    """
    if b < p.taus[0] or b > p.taus[-1]:
        raise ValueError(f"value {b} outside profile support "
                         f"[{p.taus[0]}, {p.taus[-1]}]; use intermediate_score")
    idx = int(np.searchsorted(p.taus, b, side="right")) - 1
    idx = min(idx, p.n_intervals - 1)
    return float(p.taus[idx + 1] - p.taus[idx])


def _intermediate(p: PercentileProfile, b: float, scale: bool) -> float:
    tau_lo = float(p.taus[0])
    tau_hi = float(p.taus[-1])
    if tau_lo <= b <= tau_hi:
        return matched_width(p, b)
    if not scale:
        return p.max_width
    iqr_eff = max(p.iqr, IQR_FLOOR)
    dist = (tau_lo - b) if b < tau_lo else (b - tau_hi)
    return (1.0 + dist / iqr_eff) * p.max_width


def intermediate_score(p: PercentileProfile, b: float) -> float:
    """Matched interval width, extrapolated beyond the grid.

    Below ``taus[0]``: ``(1 + (taus[0] - b) / iqr) * max_width``; above
    ``taus[-1]`` symmetrically; otherwise the matched width. A zero IQR is
    floored at ``IQR_FLOOR`` to keep the score finite.
    """
    return _intermediate(p, b, scale=True)


def clip_score(value: float, eta: float) -> float:
    """Cap a partial score at ``eta / 100``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return min(value, eta / 100.0)


@dataclass(frozen=True)
class QcadParams:
    """Scoring hyperparameters (defaults follow the recommended settings).

    ``n_neighbors=None`` resolves to ``min(n // 2, 500)`` per dataset.
    ``eta=None`` disables clipping; ``scale_extrapolation=False`` scores
    out-of-support values with the bare maximum width (ablation switches).
    """

    n_neighbors: int | None = None
    n_quantiles: int = 100
    n_trees: int = 10
    max_split_features: int | None = None
    min_samples_split: int = 10
    eta: float | None = 10.0
    scale_extrapolation: bool = True
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_neighbors is not None and self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.n_quantiles < 1:
            raise ValueError("n_quantiles must be >= 1")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive (or None to disable clipping)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolve_k(self, n: int) -> int:
        k = self.n_neighbors if self.n_neighbors is not None else min(n // 2, 500)
        if not 1 <= k <= n - 1:
            raise ValueError(f"neighbour count k={k} out of range [1, {n - 1}]")
        return k

    def forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            max_split_features=self.max_split_features,
            min_samples_split=self.min_samples_split,
        )


@dataclass(frozen=True)
class FeatureScore:
    """Per-feature scoring breakdown kept for explanations and ablations."""

    feature: str
    value: float
    tau_low: float
    tau_high: float
    iqr: float
    max_width: float
    matched: float | None
    intermediate: float
    partial: float

    def intermediate_for(self, scale: bool) -> float:
        """Re-derive the pre-clip score under either extrapolation mode."""
        if self.matched is not None:
            return self.matched
        if not scale:
            return self.max_width
        iqr_eff = max(self.iqr, IQR_FLOOR)
        if self.value < self.tau_low:
            dist = self.tau_low - self.value
        else:
            dist = self.value - self.tau_high
        return (1.0 + dist / iqr_eff) * self.max_width


@dataclass(frozen=True)
class ObjectScore:
    """Scoring result for one object; the final score is the mean of the
    per-feature partial scores."""

    index: int
    reference_group: ReferenceGroup
    partial_scores: dict[str, float]
    final_score: float
    feature_scores: tuple[FeatureScore, ...] | None = None


def _finalize(partials: dict[str, float]) -> float:
    return sum(partials.values()) / len(partials)


def _score_features(
    feature_names: tuple[str, ...],
    profiles: list[tuple[PercentileProfile, float]],
    params: QcadParams,
) -> tuple[FeatureScore, ...]:
    out = []
    for name, (profile, b) in zip(feature_names, profiles):
        tau_lo = float(profile.taus[0])
        tau_hi = float(profile.taus[-1])
        inside = tau_lo <= b <= tau_hi
        matched = matched_width(profile, b) if inside else None
        inter = _intermediate(profile, b, params.scale_extrapolation)
        partial = inter if params.eta is None else clip_score(inter, params.eta)
        out.append(FeatureScore(
            feature=name,
            value=float(b),
            tau_low=tau_lo,
            tau_high=tau_hi,
            iqr=profile.iqr,
            max_width=profile.max_width,
            matched=matched,
            intermediate=inter,
            partial=partial,
        ))
    return tuple(out)


def _object_profiles(
    ctx: np.ndarray,
    beh: np.ndarray,
    members: np.ndarray,
    i: int,
    row_id: int,
    params: QcadParams,
) -> list[tuple[PercentileProfile, float]]:
    """Fit one forest per behavioral feature on the reference group and
    profile the object's contextual row. Streams are keyed on the object's
    stable row id and the feature position."""
    fparams = params.forest_params()
    x_train = np.ascontiguousarray(ctx[members])
    u = ctx[i]
    profiles = []
    for q in range(beh.shape[1]):
        seed_iq = mix_seed(params.seed, row_id, q)
        forest = fit_forest(x_train, beh[members, q], fparams, seed_iq)
        profile = percentile_profile(forest, u, params.n_quantiles)
        profiles.append((profile, float(beh[i, q])))
    return profiles


def object_profiles(
    ds: Dataset,
    members: np.ndarray,
    i: int,
    params: QcadParams,
) -> list[tuple[str, PercentileProfile, float]]:
    """Rebuild the per-feature quantile profiles for one object given its
    reference group. With the same dataset, group, and parameters this
    reproduces exactly the profiles used during scoring."""
    if not ds.normalized:
        raise ValueError("dataset must be min-max normalized before scoring")
    ctx = ds.contextual_matrix()
    beh = ds.behavioral_matrix()
    profiles = _object_profiles(ctx, beh, np.asarray(members, dtype=np.int64),
                                i, int(ds.row_ids[i]), params)
    names = [f.name for f in ds.schema.behavioral]
    return [(name, profile, b) for name, (profile, b) in zip(names, profiles)]


def score_object(
    ds: Dataset,
    m: DistanceMatrix,
    i: int,
    params: QcadParams,
) -> ObjectScore:
    """Score one object against its reference group.

    The object's own row never enters the training data. Requires a
    normalized dataset and the contextual distance matrix.
    """
    if not ds.normalized:
        raise ValueError("dataset must be min-max normalized before scoring")
    ctx = ds.contextual_matrix()
    beh = ds.behavioral_matrix()
    return _score_object_impl(ds, m, i, params, ctx, beh, params.resolve_k(ds.n))


def _score_object_impl(ds, m, i, params, ctx, beh, k) -> ObjectScore:
    try:
        group = reference_group(m, i, k)
        profiles = _object_profiles(ctx, beh, group.members, i, int(ds.row_ids[i]), params)
        names = tuple(f.name for f in ds.schema.behavioral)
        feature_scores = _score_features(names, profiles, params)
        partials = {fs.feature: fs.partial for fs in feature_scores}
        return ObjectScore(
            index=i,
            reference_group=group,
            partial_scores=partials,
            final_score=_finalize(partials),
            feature_scores=feature_scores,
        )
    except ValueError as exc:
        raise ScoringError(f"object {i}: {exc}") from exc


def score_dataset(
    ds: Dataset,
    params: QcadParams,
    matrix: DistanceMatrix | None = None,
) -> list[ObjectScore]:
    """Score every object; order preserved, deterministic for a fixed seed
    regardless of ``params.threads``."""
    if not ds.normalized:
        raise ValueError("dataset must be min-max normalized before scoring")
    if matrix is None:
        matrix = distance_matrix(ds)
    elif matrix.n != ds.n:
        raise ValueError(f"distance matrix is {matrix.n}x{matrix.n}, dataset has {ds.n} rows")
    k = params.resolve_k(ds.n)
    ctx = ds.contextual_matrix()
    beh = ds.behavioral_matrix()

    def work(i: int) -> ObjectScore:
        return _score_object_impl(ds, matrix, i, params, ctx, beh, k)

    if params.threads == 1:
        return [work(i) for i in range(ds.n)]
    with ThreadPoolExecutor(max_workers=params.threads) as pool:
        return list(pool.map(work, range(ds.n)))


def write_scores_jsonl(entries: list[ObjectScore], path: str | Path) -> None:
    """One JSON record per object: index, final score, per-feature partial
    scores, and the reference-group indices."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in entries:
            record = {
                "index": e.index,
                "final_score": e.final_score,
                "partial_scores": e.partial_scores,
                "reference_group": [int(j) for j in e.reference_group.members],
            }
            fh.write(json.dumps(record) + "\n")


def read_scores_jsonl(path: str | Path) -> list[ObjectScore]:
    """Read score records back; per-feature diagnostics are not stored."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        members = np.asarray(rec["reference_group"], dtype=np.int64)
        entries.append(ObjectScore(
            index=int(rec["index"]),
            reference_group=ReferenceGroup(center=int(rec["index"]), members=members),
            partial_scores={k: float(v) for k, v in rec["partial_scores"].items()},
            final_score=float(rec["final_score"]),
        ))
    return entries
