"""Command-line interface: synth, detect, explain, eval, sweep.

Exit codes: 0 on success, 1 for runtime or data errors, 2 for usage errors.
Every randomized command takes ``--seed``; identical invocations produce
byte-identical output files. A ``--config`` file holds ``key=value`` lines
(flag names without dashes); flags given after ``--config`` override it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import LoadError, load_csv, load_schema, minmax_normalize, save_csv, save_schema
from .explain import explain, render_beanplot, render_context_histogram, write_explanation
from .experiments import (
    format_results_table,
    run_trials,
    sweep_eta,
    sweep_k,
    sweep_scaling,
    write_results_csv,
)
from .gower import distance_matrix, load_distance_matrix, save_distance_matrix
from .metrics import UndefinedMetricError
from .scoring import (
    QcadParams,
    ScoringError,
    object_profiles,
    read_scores_jsonl,
    score_dataset,
    write_scores_jsonl,
)
from .synth import SCHEMES, SchemeSpec, inject_anomalies, make_synthetic

#: Terminal tables show scores scaled by 100; files always carry raw values.
PRESENTATION_SCALE = 100.0


def _eta_type(text: str) -> float | None:
    if text.lower() == "none":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'none', got {text!r}")


def _add_detector_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--k", type=int, default=None,
                     help="neighbours per reference group (default min(N/2, 500))")
    sub.add_argument("--eta", type=_eta_type, default=10.0,
                     help="clip partial scores at eta/100; 'none' disables (default 10)")
    sub.add_argument("--trees", type=int, default=10, help="trees per forest (default 10)")
    sub.add_argument("--nq", type=int, default=100,
                     help="quantile grid intervals (default 100)")
    sub.add_argument("--nf", type=int, default=None,
                     help="features considered per split (default: all)")
    sub.add_argument("--ns", type=int, default=10,
                     help="minimum samples to split a node (default 10)")
    sub.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads; results are independent of this")


def _params_from_args(args: argparse.Namespace) -> QcadParams:
    return QcadParams(
        n_neighbors=args.k,
        n_quantiles=args.nq,
        n_trees=args.trees,
        max_split_features=args.nf,
        min_samples_split=args.ns,
        eta=args.eta,
        seed=args.seed,
        threads=args.threads,
    )


def _add_data_flags(sub: argparse.ArgumentParser, required: bool) -> None:
    sub.add_argument("--data", type=Path, required=required, help="input CSV")
    sub.add_argument("--schema", type=Path, required=required,
                     help="schema file (name,role,kind per line)")


def _add_scheme_flags(sub: argparse.ArgumentParser, scheme_required: bool) -> None:
    sub.add_argument("--scheme", choices=SCHEMES, required=scheme_required,
                     help="synthetic dependency scheme")
    sub.add_argument("--n", type=int, default=2000, help="sample count (default 2000)")
    sub.add_argument("--p", type=int, default=5, help="contextual features (default 5)")
    sub.add_argument("--pcat", type=int, default=2,
                     help="how many contextual features are categorical (default 2)")
    sub.add_argument("--q", type=int, default=5, help="behavioral features (default 5)")


def _load_normalized(args: argparse.Namespace):
    schema = load_schema(args.schema)
    return minmax_normalize(load_csv(args.data, schema))


def _get_matrix(ds, cache: Path | None):
    if cache is not None and cache.exists():
        matrix = load_distance_matrix(cache)
        if matrix.n != ds.n:
            raise LoadError(f"{cache}: cached matrix is {matrix.n}x{matrix.n}, "
                            f"dataset has {ds.n} rows")
        return matrix
    matrix = distance_matrix(ds)
    if cache is not None:
        save_distance_matrix(matrix, cache)
    return matrix


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SchemeSpec(
        scheme=args.scheme,
        n_contextual=args.p,
        n_categorical=args.pcat,
        n_behavioral=args.q,
        n_samples=args.n,
        seed=args.seed,
    )
    ds = make_synthetic(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.inject_rate > 0:
        m = max(1, round(args.inject_rate * ds.n))
        ds, record = inject_anomalies(ds, m, args.seed)
        record.write(out_dir / "injection.json")
        print(f"injected {m} anomalies ({100 * m / ds.n:.1f}%)")
    save_csv(ds, out_dir / "data.csv")
    save_schema(ds.schema, out_dir / "schema.txt")
    print(f"wrote {out_dir / 'data.csv'} ({ds.n} rows) and {out_dir / 'schema.txt'}")
    return 0


def _print_top(entries, top: int) -> None:
    ranked = sorted(entries, key=lambda e: (-e.final_score, e.index))[:top]
    print(f"{'rank':>4} {'index':>6} {'score':>8}  top feature")
    for rank, e in enumerate(ranked, 1):
        name, partial = max(e.partial_scores.items(), key=lambda kv: (kv[1], kv[0]))
        print(f"{rank:>4} {e.index:>6} {PRESENTATION_SCALE * e.final_score:>8.1f}  "
              f"{name} ({PRESENTATION_SCALE * partial:.1f})")


def cmd_detect(args: argparse.Namespace) -> int:
    ds = _load_normalized(args)
    params = _params_from_args(args)
    params.resolve_k(ds.n)
    matrix = _get_matrix(ds, args.distance_cache)
    entries = score_dataset(ds, params, matrix)
    write_scores_jsonl(entries, args.out)
    print(f"scored {ds.n} objects -> {args.out}")
    _print_top(entries, args.top)
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    if args.index is None and args.top is None:
        raise ValueError("give --index or --top")
    ds = _load_normalized(args)
    params = _params_from_args(args)
    entries = read_scores_jsonl(args.scores)
    if len(entries) != ds.n:
        raise LoadError(f"{args.scores}: {len(entries)} records for {ds.n} data rows")
    if args.index is not None:
        if not 0 <= args.index < ds.n:
            raise ValueError(f"--index {args.index} out of range [0, {ds.n - 1}]")
        targets = [args.index]
    else:
        ranked = sorted(entries, key=lambda e: (-e.final_score, e.index))
        targets = [e.index for e in ranked[: args.top]]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = args.h if args.h is not None else min(len(ds.schema.behavioral), 3)
    by_index = {e.index: e for e in entries}
    for i in targets:
        entry = by_index[i]
        result = explain(entry, ds, h)
        write_explanation(result, out_dir / f"explanation_{i}.json")
        for name, profile, actual in object_profiles(
            ds, entry.reference_group.members, i, params
        ):
            svg = render_beanplot(profile, actual, name)
            (out_dir / f"beanplot_{i}_{name}.svg").write_text(svg, encoding="utf-8")
        for hist in result.group_profile:
            svg = render_context_histogram(hist)
            (out_dir / f"context_{i}_{hist.feature}.svg").write_text(svg, encoding="utf-8")
        top_name, top_score = result.top_features[0]
        print(f"object {i}: score {PRESENTATION_SCALE * entry.final_score:.1f}, "
              f"strongest feature {top_name} "
              f"({PRESENTATION_SCALE * top_score:.1f})")
    print(f"explanations written to {out_dir}")
    return 0


def _eval_source(args: argparse.Namespace):
    if args.scheme is not None:
        return SchemeSpec(
            scheme=args.scheme,
            n_contextual=args.p,
            n_categorical=args.pcat,
            n_behavioral=args.q,
            n_samples=args.n,
            seed=args.seed,
        )
    if args.data is None or args.schema is None:
        raise ValueError("give --scheme or both --data and --schema")
    return _load_normalized(args)


def cmd_eval(args: argparse.Namespace) -> int:
    source = _eval_source(args)
    params = _params_from_args(args)
    result = run_trials(source, params, args.trials, anomaly_rate=args.inject_rate)
    label = args.scheme if args.scheme is not None else Path(args.data).stem
    results = {label: result}
    print(format_results_table(results))
    if args.out is not None:
        write_results_csv(results, args.out)
        print(f"results written to {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    source = _eval_source(args)
    params = _params_from_args(args)
    if args.sweep == "k":
        if not args.values:
            raise ValueError("--values is required for a k sweep")
        k_values = [int(v) for v in args.values.split(",")]
        results = sweep_k(source, params, k_values, args.trials,
                          anomaly_rate=args.inject_rate)
        results = {f"k={k}": r for k, r in results.items()}
    elif args.sweep == "eta":
        if not args.values:
            raise ValueError("--values is required for an eta sweep")
        eta_values = [_eta_type(v) for v in args.values.split(",")]
        results = sweep_eta(source, params, eta_values, args.trials,
                            anomaly_rate=args.inject_rate)
    else:
        results = sweep_scaling(source, params, args.trials,
                                anomaly_rate=args.inject_rate)
    print(format_results_table(results))
    if args.out is not None:
        write_results_csv(results, args.out)
        print(f"results written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcad",
        description="Contextual anomaly detection and explanation on mixed-type tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_scheme_flags(p_synth, scheme_required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--inject-rate", type=float, default=0.0,
                         help="optionally inject this fraction of anomalies")
    p_synth.add_argument("--out-dir", type=Path, default=Path("."),
                         help="directory for data.csv and schema.txt")
    p_synth.add_argument("--config", type=Path, help="key=value defaults file")
    p_synth.set_defaults(func=cmd_synth)

    p_detect = sub.add_parser("detect", help="score every record of a dataset")
    _add_data_flags(p_detect, required=True)
    _add_detector_flags(p_detect)
    p_detect.add_argument("--out", type=Path, default=Path("scores.jsonl"),
                          help="scores output (JSON lines)")
    p_detect.add_argument("--top", type=int, default=10,
                          help="rows in the printed ranking (default 10)")
    p_detect.add_argument("--distance-cache", type=Path, default=None,
                          help="binary distance matrix cache to reuse or create")
    p_detect.add_argument("--config", type=Path, help="key=value defaults file")
    p_detect.set_defaults(func=cmd_detect)

    p_explain = sub.add_parser("explain", help="explain scored objects")
    _add_data_flags(p_explain, required=True)
    _add_detector_flags(p_explain)
    p_explain.add_argument("--scores", type=Path, required=True,
                           help="scores JSONL produced by detect (same data and flags)")
    p_explain.add_argument("--index", type=int, default=None, help="object to explain")
    p_explain.add_argument("--top", type=int, default=None,
                           help="explain this many highest-scored objects")
    p_explain.add_argument("--h", type=int, default=None,
                           help="features listed in the ranking (default min(Q, 3))")
    p_explain.add_argument("--out-dir", type=Path, default=Path("explanations"))
    p_explain.add_argument("--config", type=Path, help="key=value defaults file")
    p_explain.set_defaults(func=cmd_explain)

    p_eval = sub.add_parser("eval", help="multi-trial injection benchmark")
    _add_scheme_flags(p_eval, scheme_required=False)
    _add_data_flags(p_eval, required=False)
    _add_detector_flags(p_eval)
    p_eval.add_argument("--trials", type=int, default=10)
    p_eval.add_argument("--inject-rate", type=float, default=0.025)
    p_eval.add_argument("--out", type=Path, default=None, help="results CSV")
    p_eval.add_argument("--config", type=Path, help="key=value defaults file")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="hyperparameter sweeps")
    _add_scheme_flags(p_sweep, scheme_required=False)
    _add_data_flags(p_sweep, required=False)
    _add_detector_flags(p_sweep)
    p_sweep.add_argument("--sweep", choices=("k", "eta", "scaling"), required=True)
    p_sweep.add_argument("--values", type=str, default=None,
                         help="comma-separated sweep values (eta accepts 'none')")
    p_sweep.add_argument("--trials", type=int, default=5)
    p_sweep.add_argument("--inject-rate", type=float, default=0.025)
    p_sweep.add_argument("--out", type=Path, default=None, help="results CSV")
    p_sweep.add_argument("--config", type=Path, help="key=value defaults file")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Replace ``--config FILE`` (or ``--config=FILE``) with the file's
    key=value pairs as flags, in place, so flags written after it win."""
    idx = path = None
    for pos, token in enumerate(argv):
        if token == "--config" and pos + 1 < len(argv):
            idx, path, consumed = pos, Path(argv[pos + 1]), 2
            break
        if token.startswith("--config="):
            idx, path, consumed = pos, Path(token.split("=", 1)[1]), 1
            break
    if idx is None:
        return argv
    tokens: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LoadError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        tokens.extend([f"--{key.strip()}", value.strip()])
    return argv[:idx] + tokens + argv[idx + consumed:]


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(_expand_config(list(argv)))
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except (LoadError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ScoringError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
