"""Command-line pipeline: extract -> reduce -> train -> evaluate -> fingerprint.

Stages hand off through files (CSV matrices, JSON reports, JSON models) so any
stage can be rerun in isolation. Exit codes: 0 success, 2 input error,
3 artifact schema mismatch, 4 model/feature-registry mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, corpus, features, figures
from .corpus import CorpusError
from .evaluate import compare_feature_sets, cross_validate, stratified_folds
from .fingerprint import build_fingerprints
from .learn import (
    ForestConfig,
    GbmConfig,
    TrainingError,
    importance,
    load_model,
    per_instance_contributions,
    predict_classes,
    predict_proba,
    save_model,
    train_forest,
    train_gbm,
)
from .reduce import ReductionConfig, reduce_features
from .textparse import dump_profiles

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SCHEMA = 3
EXIT_REGISTRY = 4


class InputError(Exception):
    exit_code = EXIT_INPUT


class SchemaError(Exception):
    exit_code = EXIT_SCHEMA


class RegistryMismatch(Exception):
    exit_code = EXIT_REGISTRY


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _envelope(args, extra: dict | None = None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "config") and not isinstance(v, Path)}
    config.update({k: str(v) for k, v in vars(args).items()
                   if isinstance(v, Path)})
    env = {"tool_version": __version__, "seed": getattr(args, "seed", None),
           "config_hash": _config_hash(config)}
    if extra:
        env.update(extra)
    return env


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=False)
        fh.write("\n")


def _load_matrix(path) -> features.FeatureMatrix:
    if not Path(path).exists():
        raise InputError(f"no such file: {path}")
    try:
        return features.read_matrix_csv(path)
    except ValueError as exc:
        raise SchemaError(f"bad feature matrix {path}: {exc}") from exc


def _apply_feature_file(matrix, feature_file) -> features.FeatureMatrix:
    if feature_file is None:
        return matrix
    if not Path(feature_file).exists():
        raise InputError(f"no such file: {feature_file}")
    names = [ln.strip() for ln in open(feature_file, encoding="utf-8")
             if ln.strip()]
    try:
        return matrix.restrict(names)
    except KeyError as exc:
        raise SchemaError(f"kept-feature list does not match matrix: {exc}") from exc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gbm_config(args) -> GbmConfig:
    return GbmConfig(seed=args.seed)


def _learner_config(args):
    if args.learner == "forest":
        return ForestConfig(seed=args.seed)
    return _gbm_config(args)


# ---------------------------------------------------------------------------
# subcommands

def cmd_extract(args) -> int:
    if not Path(args.input).exists():
        raise InputError(f"no such file: {args.input}")
    try:
        records, stats = corpus.load_corpus(args.input, strict=args.strict)
    except CorpusError as exc:
        raise InputError(str(exc)) from exc
    matrix = features.build_matrix(records)
    comment = (f"agentprint {__version__} seed={args.seed} "
               f"config={_envelope(args)['config_hash']}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    features.write_matrix_csv(matrix, out, comment=comment)
    print(f"loaded={stats.loaded} skipped_incomplete={stats.skipped_incomplete} "
          f"skipped_malformed={stats.skipped_malformed}")
    print(f"wrote {matrix.n_rows}x{len(matrix.feature_names)} matrix to {out}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    matrix = _load_matrix(args.input)
    config = ReductionConfig(correlation_threshold=args.corr_threshold,
                             r2_threshold=args.r2_threshold)
    report = reduce_features(matrix, config)
    out = _outdir(args)
    payload = _envelope(args)
    payload.update(report.to_json())
    _write_json(out / "reduce.json", payload)
    with open(out / "kept_features.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(report.kept) + "\n")
    print(f"{len(matrix.feature_names)} features -> {len(report.kept)} kept "
          f"({len(report.dropped_step1)} dropped by clustering, "
          f"{len(report.dropped_step2)} by R2)")
    for name, entry in report.epv_table.items():
        flag = "  [LOW EPV]" if entry["flagged"] else ""
        print(f"  {name}: n={entry['samples']} epv={entry['epv']:.1f}{flag}")
    return EXIT_OK


def cmd_train(args) -> int:
    matrix = _apply_feature_file(_load_matrix(args.input), args.features)
    try:
        if args.learner == "forest":
            model = train_forest(matrix, ForestConfig(seed=args.seed))
        else:
            model = train_gbm(matrix, GbmConfig(seed=args.seed))
    except TrainingError as exc:
        raise InputError(str(exc)) from exc
    out = _outdir(args)
    save_model(model, out / "model.json")
    payload = _envelope(args, {
        "model_path": str(out / "model.json"),
        "kind": model.kind,
        "classes": model.classes,
        "n_features": len(model.feature_names),
        "final_train_loss": model.train_loss[-1] if model.train_loss else None,
        "top_importance": [{"feature": n, "share": s}
                           for n, s in importance(model, 10)],
    })
    _write_json(out / "train.json", payload)
    print(f"trained {model.kind} on {matrix.n_rows} rows x "
          f"{len(matrix.feature_names)} features -> {out / 'model.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    matrix = _apply_feature_file(_load_matrix(args.input), args.features)
    plan = stratified_folds(matrix.labels, k=args.folds, seed=args.seed)
    config = _learner_config(args)
    report = cross_validate(matrix, args.learner, config, plan, jobs=args.jobs)
    out = _outdir(args)
    payload = _envelope(args)
    payload.update(report.to_json())
    if args.compare:
        other = _load_matrix(args.compare)
        comparison = compare_feature_sets(matrix, other, args.learner, config,
                                          plan, jobs=args.jobs)
        payload["comparison"] = comparison
        print(f"F1 full={comparison['f1_full']:.4f} "
              f"reduced={comparison['f1_reduced']:.4f} "
              f"delta={comparison['delta']:+.4f}")
    _write_json(out / "evaluate.json", payload)
    with open(out / "confusion.csv", "w", encoding="utf-8") as fh:
        fh.write(report.confusion.to_csv())
    with open(out / "confusion.txt", "w", encoding="utf-8") as fh:
        fh.write(report.confusion.to_text() + "\n")
    if not args.no_figures:
        figures.render_confusion_matrix(report.confusion, out / "confusion.png")
    print(report.confusion.to_text())
    print(f"weighted F1={report.weighted_f1:.4f} macro F1={report.macro_f1:.4f} "
          f"fold spread={report.f1_spread:.4f}")
    return EXIT_OK


def cmd_fingerprint(args) -> int:
    matrix = _apply_feature_file(_load_matrix(args.input), args.features)
    report = build_fingerprints(matrix, _gbm_config(args), top_k=args.top_k,
                                jobs=args.jobs)
    out = _outdir(args)
    payload = _envelope(args)
    payload.update(report.to_json())
    _write_json(out / "fingerprint.json", payload)
    for agent, fp in report.per_agent.items():
        with open(out / f"fingerprint_{agent}.csv", "w", encoding="utf-8") as fh:
            fh.write("feature,gain_share\n")
            for entry in fp.top_features:
                fh.write(f"{entry['feature']},{entry['gain_share']:.12g}\n")
    with open(out / "global_importance.csv", "w", encoding="utf-8") as fh:
        fh.write("feature,share\n")
        for entry in report.global_ranking:
            fh.write(f"{entry['feature']},{entry['share']:.12g}\n")
    if not args.no_figures:
        figures.render_importance(report.global_ranking,
                                  out / "global_importance.png",
                                  "Global gain importance (multi-class)")
        figures.render_fingerprints(report, out / "fingerprint.png")
    for agent, fp in report.per_agent.items():
        top = ", ".join(f"{e['feature']} ({e['gain_share']:.1%})"
                        for e in fp.top_features)
        print(f"{agent}: {top}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if not Path(args.model).exists():
        raise InputError(f"no such file: {args.model}")
    try:
        model = load_model(args.model)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise SchemaError(f"bad model file {args.model}: {exc}") from exc
    if not Path(args.input).exists():
        raise InputError(f"no such file: {args.input}")

    if str(args.input).endswith(".csv"):
        matrix = _load_matrix(args.input)
        if matrix.feature_names != model.feature_names:
            raise RegistryMismatch(
                f"model expects {len(model.feature_names)} features, matrix has "
                f"{len(matrix.feature_names)}; feature registries must match")
        pr_ids = matrix.pr_ids
        values = matrix.values
    else:
        try:
            records, _ = corpus.load_corpus(args.input, strict=args.strict)
        except CorpusError as exc:
            raise InputError(str(exc)) from exc
        full = features.build_matrix(records)
        try:
            restricted = full.restrict(model.feature_names)
        except KeyError as exc:
            raise RegistryMismatch(f"model features not extractable: {exc}") from exc
        pr_ids = restricted.pr_ids
        values = restricted.values

    probs = predict_proba(model, values) if len(pr_ids) else np.zeros((0, 0))
    predicted = predict_classes(model, values) if len(pr_ids) else []
    contrib = (per_instance_contributions(model, values)
               if len(pr_ids) else np.zeros((0, 0)))
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i, pr_id in enumerate(pr_ids):
            row_contrib = contrib[i]
            top_idx = np.argsort(-row_contrib)[:args.top_k]
            top = [{"feature": model.feature_names[j],
                    "gain": float(row_contrib[j])}
                   for j in top_idx if row_contrib[j] > 0]
            obj = {
                "pr_id": pr_id,
                "predicted_agent": predicted[i],
                "probabilities": {c: float(p)
                                  for c, p in zip(model.classes, probs[i])},
                "top_contributing_features": top,
            }
            out_fh.write(json.dumps(obj) + "\n")
    finally:
        if args.out:
            out_fh.close()
    return EXIT_OK


def cmd_dump_features(args) -> int:
    payload = {"features": features.feature_dictionary()}
    if args.out:
        _write_json(Path(args.out), payload)
    else:
        json.dump(payload, sys.stdout, indent=1)
        print()
    return EXIT_OK


def cmd_dump_profiles(args) -> int:
    payload = dump_profiles()
    if args.out:
        _write_json(Path(args.out), payload)
    else:
        json.dump(payload, sys.stdout, indent=1)
        print()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing

def _read_config_file(path) -> dict:
    if not Path(path).exists():
        raise InputError(f"no such config file: {path}")
    values = {}
    for lineno, line in enumerate(open(path, encoding="utf-8"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentprint",
        description="Fingerprint AI coding agents from pull-request artifacts")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--input", required=True, help="input file")
        p.add_argument("--out", required=out_required, help="output path")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--config", help="key=value config file; flags override")

    p = sub.add_parser("extract", help="NDJSON corpus -> feature matrix CSV")
    common(p)
    p.add_argument("--strict", action="store_true",
                   help="abort on the first malformed line")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reduce", help="correlation + R2 feature reduction")
    common(p)
    p.add_argument("--corr-threshold", type=float, default=0.70)
    p.add_argument("--r2-threshold", type=float, default=0.90)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("train", help="train a tree-ensemble model")
    common(p)
    p.add_argument("--features", help="kept-feature list from reduce")
    p.add_argument("--learner", choices=["gbm", "forest"], default="gbm")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified cross-validation report")
    common(p)
    p.add_argument("--features", help="kept-feature list from reduce")
    p.add_argument("--learner", choices=["gbm", "forest"], default="gbm")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--compare", help="second matrix CSV to compare against")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fingerprint", help="global + per-agent importance report")
    common(p)
    p.add_argument("--features", help="kept-feature list from reduce")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("predict", help="classify unlabeled PRs with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True,
                   help="NDJSON of PRs or a feature matrix CSV")
    p.add_argument("--out", help="output NDJSON (default stdout)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--config", help="key=value config file; flags override")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("dump-features", help="feature dictionary as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_features)

    p = sub.add_parser("dump-profiles", help="extension syntax profiles as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_profiles)

    return parser


_CONFIG_KEY_TYPES = {
    "seed": int, "jobs": int, "folds": int, "top_k": int,
    "corr_threshold": float, "r2_threshold": float,
    "strict": bool, "no_figures": bool,
    "learner": str, "features": str, "compare": str,
    "input": str, "out": str, "model": str,
}


def _apply_config_file(parser, args, argv):
    """Re-parse with config-file values as defaults; flags keep precedence."""
    overrides = _read_config_file(args.config)
    defaults = {}
    for key, value in overrides.items():
        kind = _CONFIG_KEY_TYPES.get(key)
        if kind is None:
            raise InputError(f"unknown config key: {key}")
        if kind is bool:
            defaults[key] = value.lower() in ("1", "true", "yes")
        else:
            defaults[key] = kind(value)
    # defaults must reach the options owned by each subcommand parser too
    parser.set_defaults(**defaults)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                sub.set_defaults(**{k: v for k, v in defaults.items()
                                    if any(a.dest == k for a in sub._actions)})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            args = _apply_config_file(build_parser(), args, argv)
        return args.func(args)
    except (InputError, SchemaError, RegistryMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
