"""Explanation ranking, group histograms, and beanplot rendering."""

from __future__ import annotations

import json
import re

import numpy as np
import pytest

from qcad.explain import (
    explain,
    explanation_to_json,
    render_beanplot,
    render_context_histogram,
    silhouette_half_widths,
    write_explanation,
)
from qcad.gower import ReferenceGroup, distance_matrix
from qcad.scoring import ObjectScore, PercentileProfile, QcadParams, score_dataset
from conftest import make_mixed_dataset


def entry_with_partials(partials: dict[str, float], n_members=5) -> ObjectScore:
    members = np.arange(1, n_members + 1, dtype=np.int64)
    return ObjectScore(
        index=0,
        reference_group=ReferenceGroup(center=0, members=members),
        partial_scores=partials,
        final_score=sum(partials.values()) / len(partials),
    )


def three_feature_ds(n=12, seed=0):
    return make_mixed_dataset(n, n_numeric_ctx=1, n_categorical_ctx=1,
                              n_behavioral=3, seed=seed)


class TestExplain:
    def test_ranking_by_partial_score(self):
        ds = three_feature_ds()
        entry = entry_with_partials({"beh0": 0.1, "beh1": 0.02, "beh2": 0.05})
        result = explain(entry, ds, h=2)
        assert [name for name, _ in result.top_features] == ["beh0", "beh2"]

    def test_tie_breaks_by_schema_order(self):
        ds = three_feature_ds()
        entry = entry_with_partials({"beh0": 0.04, "beh1": 0.04, "beh2": 0.04})
        result = explain(entry, ds, h=3)
        assert [name for name, _ in result.top_features] == ["beh0", "beh1", "beh2"]

    def test_h_capped_at_feature_count(self):
        ds = three_feature_ds()
        entry = entry_with_partials({"beh0": 0.1, "beh1": 0.02, "beh2": 0.05})
        assert len(explain(entry, ds, h=10).top_features) == 3

    def test_h_validation(self):
        ds = three_feature_ds()
        entry = entry_with_partials({"beh0": 0.1, "beh1": 0.02, "beh2": 0.05})
        with pytest.raises(ValueError):
            explain(entry, ds, h=0)

    def test_case_study_shape(self):
        # a full explanation names the group, the final score, and the
        # dominant feature, end to end from a real scoring run
        ds = three_feature_ds(n=25, seed=4)
        entries = score_dataset(ds, QcadParams(n_neighbors=8, n_trees=3, seed=2))
        result = explain(entries[3], ds, h=2)
        assert result.index == 3
        assert result.final_score == entries[3].final_score
        top_name, top_score = result.top_features[0]
        assert top_score == max(entries[3].partial_scores.values())
        assert len(result.group_profile) == len(ds.schema.contextual)

    def test_partials_resum_to_final(self):
        ds = three_feature_ds(n=25, seed=4)
        entries = score_dataset(ds, QcadParams(n_neighbors=8, n_trees=3, seed=2))
        result = explain(entries[0], ds, h=3)
        total = sum(score for _, score in result.top_features)
        assert total / 3 == entries[0].final_score

    def test_group_histograms(self):
        ds = three_feature_ds(n=30, seed=7)
        m = distance_matrix(ds)
        entries = score_dataset(ds, QcadParams(n_neighbors=10, n_trees=2, seed=1), m)
        result = explain(entries[2], ds, h=1)
        by_name = {h.feature: h for h in result.group_profile}
        num = by_name["num0"]
        assert num.kind == "numeric"
        assert 1 <= len(num.bins) <= 10
        assert sum(count for _, _, count in num.bins) == 10  # group size
        assert num.object_value == float(ds.columns["num0"][2])
        cat = by_name["cat0"]
        assert cat.kind == "categorical"
        assert sum(count for _, count in cat.bins) == 10
        assert cat.object_value in ds.cat_labels["cat0"]

    def test_json_export(self, tmp_path):
        ds = three_feature_ds()
        entry = entry_with_partials({"beh0": 0.1, "beh1": 0.02, "beh2": 0.05})
        result = explain(entry, ds, h=2)
        blob = explanation_to_json(result)
        assert blob["index"] == 0
        assert blob["top_features"][0]["feature"] == "beh0"
        path = tmp_path / "e.json"
        write_explanation(result, path)
        assert json.loads(path.read_text()) == blob


def uniform_profile():
    return PercentileProfile(taus=np.arange(101) / 100.0)


def polygon_points(svg: str) -> np.ndarray:
    match = re.search(r'<polygon points="([^"]+)"', svg)
    assert match is not None
    pts = [tuple(map(float, pair.split(","))) for pair in match.group(1).split()]
    return np.asarray(pts)


class TestBeanplot:
    def test_silhouette_constant_for_uniform(self):
        widths = silhouette_half_widths(uniform_profile())
        np.testing.assert_allclose(widths, np.ones(100))

    def test_silhouette_peaks_where_interval_narrow(self):
        taus = np.concatenate([np.linspace(0, 0.2, 51), np.linspace(0.3, 1.0, 50)])
        p = PercentileProfile(taus=taus)
        widths = silhouette_half_widths(p)
        assert widths.argmax() < 50  # narrow region renders widest
        assert widths.max() == 1.0
        assert (widths >= 0).all()

    def test_rectangular_silhouette(self):
        svg = render_beanplot(uniform_profile(), actual=0.5, feature_name="b")
        pts = polygon_points(svg)
        xs = np.unique(pts[:, 0])
        assert len(xs) == 2  # constant width: one left edge, one right edge

    def test_actual_above_support_extends_axis(self):
        p = uniform_profile()
        svg = render_beanplot(p, actual=1.4, feature_name="b")
        actual_y = float(re.search(
            r'<line x1="60.00" y1="([\d.]+)" x2="360.00" y2="\1" stroke="black"', svg
        ).group(1))
        top_tick_y = min(
            float(m.group(2))
            for m in re.finditer(r'<line x1="([\d.]+)" y1="([\d.]+)"[^/]*stroke="blue"', svg)
        )
        assert actual_y < top_tick_y  # smaller pixel y means higher value

    def test_byte_deterministic(self):
        p = uniform_profile()
        a = render_beanplot(p, 0.7, "feat")
        b = render_beanplot(p, 0.7, "feat")
        assert a == b

    def test_degenerate_profile_renders(self):
        p = PercentileProfile(taus=np.full(101, 0.4))
        svg = render_beanplot(p, actual=0.4, feature_name="flat")
        assert "<svg" in svg and "</svg>" in svg
        assert svg.count('stroke="blue"') == 101

    def test_tick_count_and_quartile_box(self):
        svg = render_beanplot(uniform_profile(), 0.5, "b")
        assert svg.count('stroke="blue"') == 101
        assert '<rect' in svg and 'stroke="cyan"' in svg

    def test_bimodal_silhouette_shows_two_bulges(self):
        # quantile grid of an explicit two-cluster sample; the silhouette
        # must bulge near both cluster centres and pinch in the gap
        rng = np.random.default_rng(0)
        sample = np.concatenate([
            0.25 + 0.02 * rng.standard_normal(3000),
            0.75 + 0.02 * rng.standard_normal(3000),
        ])
        taus = np.quantile(sample, np.arange(101) / 100.0)
        p = PercentileProfile(taus=np.sort(taus))
        widths = silhouette_half_widths(p)
        centers = (p.taus[:-1] + p.taus[1:]) / 2.0
        lo_bulge = widths[np.abs(centers - 0.25) < 0.03].max()
        hi_bulge = widths[np.abs(centers - 0.75) < 0.03].max()
        valley = widths.min()
        assert 0.35 < centers[widths.argmin()] < 0.65  # pinch sits in the gap
        assert lo_bulge > 5 * valley
        assert hi_bulge > 5 * valley


class TestContextHistogramSvg:
    def test_numeric_bars(self):
        ds = three_feature_ds(n=30, seed=7)
        entries = score_dataset(ds, QcadParams(n_neighbors=10, n_trees=2, seed=1))
        result = explain(entries[2], ds, h=1)
        hist = next(h for h in result.group_profile if h.kind == "numeric")
        svg = render_context_histogram(hist)
        assert svg.count("<rect") == len(hist.bins)
        assert "object value" in svg

    def test_categorical_bars_highlight_object(self):
        ds = three_feature_ds(n=30, seed=7)
        entries = score_dataset(ds, QcadParams(n_neighbors=10, n_trees=2, seed=1))
        result = explain(entries[2], ds, h=1)
        hist = next(h for h in result.group_profile if h.kind == "categorical")
        svg = render_context_histogram(hist)
        if any(label == hist.object_value for label, _ in hist.bins):
            assert 'fill="orange"' in svg
