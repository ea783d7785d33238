"""Contextual anomaly detection and explanation on mixed-type tabular data.

Records are scored by how far their behavioral values sit outside the
conditional distribution learned, with quantile regression forests, over
their contextual nearest neighbours (Gower distance). Scores decompose per
behavioral feature for explanation and can be visualised as beanplots.
"""

from .dataset import (
    Dataset,
    Feature,
    FeatureSchema,
    LoadError,
    SchemaError,
    denormalize,
    label_encode,
    load_csv,
    load_schema,
    minmax_normalize,
    save_csv,
    save_schema,
)
from .explain import Explanation, explain, render_beanplot, render_context_histogram
from .experiments import (
    TrialResult,
    run_trials,
    sweep_eta,
    sweep_k,
    sweep_scaling,
    sweep_score_variants,
    write_results_csv,
)
from .gower import (
    DistanceMatrix,
    ReferenceGroup,
    distance_matrix,
    gower_distance,
    reference_group,
)
from .metrics import UndefinedMetricError, precision_at_n, pr_auc, roc_auc
from .qrf import ForestParams, QuantileForest, Tree, fit_forest, fit_tree
from .scoring import (
    FeatureScore,
    ObjectScore,
    PercentileProfile,
    QcadParams,
    ScoringError,
    clip_score,
    intermediate_score,
    matched_width,
    percentile_profile,
    read_scores_jsonl,
    score_dataset,
    score_object,
    write_scores_jsonl,
)
from .synth import InjectionRecord, SchemeSpec, gen_behavioral, gen_contextual, inject_anomalies, make_synthetic

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Feature", "FeatureSchema", "LoadError", "SchemaError",
    "denormalize", "label_encode", "load_csv", "load_schema",
    "minmax_normalize", "save_csv", "save_schema",
    "Explanation", "explain", "render_beanplot", "render_context_histogram",
    "TrialResult", "run_trials", "sweep_eta", "sweep_k", "sweep_scaling",
    "sweep_score_variants", "write_results_csv",
    "DistanceMatrix", "ReferenceGroup", "distance_matrix", "gower_distance",
    "reference_group",
    "UndefinedMetricError", "precision_at_n", "pr_auc", "roc_auc",
    "ForestParams", "QuantileForest", "Tree", "fit_forest", "fit_tree",
    "FeatureScore", "ObjectScore", "PercentileProfile", "QcadParams",
    "ScoringError", "clip_score", "intermediate_score", "matched_width",
    "percentile_profile", "read_scores_jsonl", "score_dataset", "score_object",
    "write_scores_jsonl",
    "InjectionRecord", "SchemeSpec", "gen_behavioral", "gen_contextual",
    "inject_anomalies", "make_synthetic",
]
