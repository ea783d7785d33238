"""Anomaly explanations: ranked feature attributions and beanplot rendering.

An explanation reports where an object's score comes from: the behavioral
features ranked by their partial scores, plus histograms showing how the
object sits inside its reference group on every contextual feature. The
beanplot renders the learned conditional percentile grid for one behavioral
feature as tick marks, a quartile box, an inverse-width density silhouette,
and a horizontal line at the object's actual value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import KIND_CATEGORICAL, Dataset
from .scoring import ObjectScore, PercentileProfile

# Fixed canvas so rendered documents are byte-stable.
_W, _H = 400, 600
_PLOT_TOP, _PLOT_BOTTOM = 40.0, 560.0
_PLOT_LEFT, _PLOT_RIGHT = 60.0, 360.0
_CENTER = (_PLOT_LEFT + _PLOT_RIGHT) / 2.0
_HALF_MAX = 140.0
_TICK_HALF = 14.0
_BOX_HALF = 45.0

#: Interval widths below this are treated as this floor when converting to
#: densities, so zero-width intervals render with finite width.
WIDTH_FLOOR = 1e-9


@dataclass(frozen=True)
class ContextHistogram:
    """Reference-group distribution of one contextual feature.

    Numeric bins are ``(lo, hi, count)`` over at most 10 equal-width bins;
    categorical bins are ``(label, count)`` per code observed in the group.
    """

    feature: str
    kind: str
    object_value: float | str
    bins: tuple


@dataclass(frozen=True)
class Explanation:
    index: int
    final_score: float
    top_features: tuple[tuple[str, float], ...]
    group_profile: tuple[ContextHistogram, ...]


def _context_histogram(ds: Dataset, name: str, members: np.ndarray, i: int) -> ContextHistogram:
    feature = ds.schema.feature(name)
    col = ds.columns[name]
    group = col[members]
    if feature.kind == KIND_CATEGORICAL:
        labels = ds.cat_labels[name]
        codes, counts = np.unique(group, return_counts=True)
        bins = tuple((labels[c], int(cnt)) for c, cnt in zip(codes, counts))
        return ContextHistogram(name, feature.kind, labels[col[i]], bins)
    lo = float(group.min())
    hi = float(group.max())
    if hi == lo:
        bins = ((lo, hi, int(group.size)),)
    else:
        counts, edges = np.histogram(group, bins=10, range=(lo, hi))
        bins = tuple(
            (float(edges[b]), float(edges[b + 1]), int(counts[b]))
            for b in range(len(counts))
        )
    return ContextHistogram(name, feature.kind, float(col[i]), bins)


def explain(entry: ObjectScore, ds: Dataset, h: int) -> Explanation:
    """Explanation for a scored object: top-h features plus group profile.

    Features are ranked by partial score descending; ties fall back to the
    behavioral feature order in the schema.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    names = [f.name for f in ds.schema.behavioral]
    ranked = sorted(
        names,
        key=lambda name: (-entry.partial_scores[name], names.index(name)),
    )
    top = tuple((name, entry.partial_scores[name]) for name in ranked[: min(h, len(names))])
    profile = tuple(
        _context_histogram(ds, f.name, entry.reference_group.members, entry.index)
        for f in ds.schema.contextual
    )
    return Explanation(
        index=entry.index,
        final_score=entry.final_score,
        top_features=top,
        group_profile=profile,
    )


def explanation_to_json(e: Explanation) -> dict:
    return {
        "index": e.index,
        "final_score": e.final_score,
        "top_features": [{"feature": n, "score": s} for n, s in e.top_features],
        "group_profile": [
            {
                "feature": hist.feature,
                "kind": hist.kind,
                "object_value": hist.object_value,
                "bins": [list(b) for b in hist.bins],
            }
            for hist in e.group_profile
        ],
    }


def write_explanation(e: Explanation, path: str | Path) -> None:
    Path(path).write_text(json.dumps(explanation_to_json(e), indent=2) + "\n", encoding="utf-8")


def _fmt(v: float) -> str:
    out = f"{v:.2f}"
    return "0.00" if out == "-0.00" else out


def silhouette_half_widths(p: PercentileProfile) -> np.ndarray:
    """Normalized per-interval silhouette half-widths in [0, 1].

    Densities are estimated as interval probability over interval width
    (widths floored at ``WIDTH_FLOOR``), then scaled so the densest
    interval reaches 1: narrow intervals render wide.
    """
    widths = np.maximum(p.widths, WIDTH_FLOOR)
    density = (1.0 / p.n_intervals) / widths
    return density / density.max()


def render_beanplot(p: PercentileProfile, actual: float, feature_name: str) -> str:
    """SVG document for one object and behavioral feature.

    Blue ticks mark the conditional grid values, the cyan box spans the
    quartiles with a line at the median, the red silhouette's width is
    proportional to the estimated density, and the black line marks the
    object's actual value. The vertical axis covers the grid and the
    actual value with 5% padding.
    """
    taus = p.taus
    lo = min(float(taus[0]), actual)
    hi = max(float(taus[-1]), actual)
    span = hi - lo
    if span == 0.0:
        lo -= 0.5
        hi += 0.5
        span = 1.0
    pad = 0.05 * span
    lo -= pad
    hi += pad
    span = hi - lo

    def y(v: float) -> float:
        return _PLOT_BOTTOM - (v - lo) / span * (_PLOT_BOTTOM - _PLOT_TOP)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<text x="{_fmt(_CENTER)}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{feature_name}</text>',
    ]

    half = silhouette_half_widths(p) * _HALF_MAX
    pts = []
    for i in range(p.n_intervals - 1, -1, -1):
        pts.append((_CENTER + half[i], y(float(taus[i + 1]))))
        pts.append((_CENTER + half[i], y(float(taus[i]))))
    for i in range(p.n_intervals):
        pts.append((_CENTER - half[i], y(float(taus[i]))))
        pts.append((_CENTER - half[i], y(float(taus[i + 1]))))
    point_str = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
    parts.append(f'<polygon points="{point_str}" fill="red" fill-opacity="0.5"/>')

    n = p.n_intervals
    q1 = float(taus[int(round(0.25 * n))])
    q2 = float(taus[int(round(0.50 * n))])
    q3 = float(taus[int(round(0.75 * n))])
    parts.append(
        f'<rect x="{_fmt(_CENTER - _BOX_HALF)}" y="{_fmt(y(q3))}" '
        f'width="{_fmt(2 * _BOX_HALF)}" height="{_fmt(max(y(q1) - y(q3), 0.0))}" '
        f'fill="none" stroke="cyan" stroke-width="2"/>'
    )
    parts.append(
        f'<line x1="{_fmt(_CENTER - _BOX_HALF)}" y1="{_fmt(y(q2))}" '
        f'x2="{_fmt(_CENTER + _BOX_HALF)}" y2="{_fmt(y(q2))}" '
        f'stroke="cyan" stroke-width="2"/>'
    )

    for tau in taus:
        ty = y(float(tau))
        parts.append(
            f'<line x1="{_fmt(_CENTER - _TICK_HALF)}" y1="{_fmt(ty)}" '
            f'x2="{_fmt(_CENTER + _TICK_HALF)}" y2="{_fmt(ty)}" '
            f'stroke="blue" stroke-width="1"/>'
        )

    ay = y(actual)
    parts.append(
        f'<line x1="{_fmt(_PLOT_LEFT)}" y1="{_fmt(ay)}" '
        f'x2="{_fmt(_PLOT_RIGHT)}" y2="{_fmt(ay)}" stroke="black" stroke-width="2"/>'
    )
    parts.append(
        f'<text x="{_fmt(_PLOT_RIGHT)}" y="{_fmt(ay - 6)}" text-anchor="end" '
        f'font-family="sans-serif" font-size="12">actual={actual!r}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_context_histogram(hist: ContextHistogram) -> str:
    """SVG bar chart of a reference group's values for one contextual
    feature, with the object's own value marked."""
    counts = [b[-1] for b in hist.bins]
    peak = max(counts) if counts else 1
    n_bins = len(hist.bins)
    plot_w = _PLOT_RIGHT - _PLOT_LEFT
    bar_w = plot_w / n_bins
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<text x="{_fmt(_CENTER)}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{hist.feature}</text>',
    ]
    for b, bin_ in enumerate(hist.bins):
        count = bin_[-1]
        height = (count / peak) * (_PLOT_BOTTOM - _PLOT_TOP)
        x0 = _PLOT_LEFT + b * bar_w
        if hist.kind == KIND_CATEGORICAL:
            selected = bin_[0] == hist.object_value
            label = str(bin_[0])
        else:
            lo, hi = bin_[0], bin_[1]
            # last bin closes the range on the right
            selected = (lo <= hist.object_value < hi) or (
                b == n_bins - 1 and hist.object_value == hi
            )
            label = _fmt(lo)
        fill = "orange" if selected else "steelblue"
        parts.append(
            f'<rect x="{_fmt(x0 + 1)}" y="{_fmt(_PLOT_BOTTOM - height)}" '
            f'width="{_fmt(bar_w - 2)}" height="{_fmt(height)}" fill="{fill}"/>'
        )
        parts.append(
            f'<text x="{_fmt(x0 + bar_w / 2)}" y="{_fmt(_PLOT_BOTTOM + 16)}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>'
        )
    parts.append(
        f'<text x="{_fmt(_CENTER)}" y="{_fmt(_PLOT_BOTTOM + 34)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">object value: {hist.object_value}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
