"""Stratified cross-validation, confusion matrices, and per-class metrics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import AgentLabel, CLASS_ORDER
from .features import FeatureMatrix
from .learn import (
    ForestConfig,
    GbmConfig,
    predict_classes,
    train_forest,
    train_gbm,
)


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # row index -> fold id
    seed: int


def stratified_folds(labels: list[AgentLabel], k: int = 5, seed: int = 42) -> FoldPlan:
    """Per-class shuffle (seeded) then round-robin deal; per-class fold sizes
    never differ by more than one."""
    n = len(labels)
    rng = np.random.default_rng(seed)
    assignments = np.full(n, -1, dtype=int)
    present = [c for c in CLASS_ORDER if c in set(labels)]
    for label in present:
        idx = np.array([i for i, l in enumerate(labels) if l == label])
        if idx.size < k:
            raise ValueError(f"class {label.value} has {idx.size} samples, "
                             f"needs at least {k}")
        rng.shuffle(idx)
        for pos, row in enumerate(idx):
            assignments[row] = pos % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


@dataclass
class ConfusionMatrix:
    classes: list[str]
    counts: np.ndarray  # rows = true, cols = predicted

    def to_json(self) -> dict:
        return {"classes": self.classes, "counts": self.counts.tolist()}

    def to_text(self) -> str:
        width = max(12, max(len(c) for c in self.classes) + 2)
        header = " " * width + "".join(c.rjust(width) for c in self.classes)
        lines = [header]
        for name, row in zip(self.classes, self.counts):
            lines.append(name.rjust(width)
                         + "".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.classes)]
        for name, row in zip(self.classes, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvaluationReport:
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: ConfusionMatrix
    per_fold_f1: list[float] = field(default_factory=list)
    f1_spread: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "per_class": {name: {"precision": m.precision, "recall": m.recall,
                                 "f1": m.f1, "support": m.support}
                          for name, m in self.per_class.items()},
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "weighted": {"precision": self.weighted_precision,
                         "recall": self.weighted_recall, "f1": self.weighted_f1},
            "confusion": self.confusion.to_json(),
            "per_fold_f1": self.per_fold_f1,
            "f1_spread": self.f1_spread,
            "warnings": self.warnings,
        }


def metrics_from_confusion(confusion: ConfusionMatrix) -> EvaluationReport:
    counts = confusion.counts.astype(float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    warnings: list[str] = []
    per_class: dict[str, ClassMetrics] = {}
    diag = np.diag(counts)
    col_sums = counts.sum(axis=0)
    row_sums = counts.sum(axis=1)
    for i, name in enumerate(confusion.classes):
        if col_sums[i] == 0:
            precision = 0.0
            warnings.append(f"precision undefined for {name} (no predictions)")
        else:
            precision = diag[i] / col_sums[i]
        if row_sums[i] == 0:
            recall = 0.0
            warnings.append(f"recall undefined for {name} (no samples)")
        else:
            recall = diag[i] / row_sums[i]
        if precision + recall == 0:
            f1 = 0.0
            if col_sums[i] > 0 and row_sums[i] > 0:
                warnings.append(f"f1 undefined for {name}")
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[name] = ClassMetrics(precision, recall, f1, int(row_sums[i]))

    metrics = list(per_class.values())
    supports = np.array([m.support for m in metrics], dtype=float)
    macro = lambda attr: float(np.mean([getattr(m, attr) for m in metrics]))
    weighted = lambda attr: float(
        (supports * [getattr(m, attr) for m in metrics]).sum() / supports.sum())
    return EvaluationReport(
        per_class=per_class,
        macro_precision=macro("precision"), macro_recall=macro("recall"),
        macro_f1=macro("f1"),
        weighted_precision=weighted("precision"), weighted_recall=weighted("recall"),
        weighted_f1=weighted("f1"),
        confusion=confusion, warnings=warnings,
    )


def _train(matrix: FeatureMatrix, learner: str, config) -> object:
    if learner == "gbm":
        return train_gbm(matrix, config or GbmConfig())
    if learner == "forest":
        return train_forest(matrix, config or ForestConfig())
    raise ValueError(f"unknown learner: {learner}")


def cross_validate(matrix: FeatureMatrix, learner: str, config,
                   plan: FoldPlan, jobs: int = 1) -> EvaluationReport:
    """Train on k-1 folds, predict the held-out fold; predictions pooled into
    one confusion matrix, with per-fold weighted F1 kept for stability checks."""
    if plan.assignments.shape[0] != matrix.n_rows:
        raise ValueError("fold plan does not match matrix rows")
    present = [c.value for c in CLASS_ORDER if c in set(matrix.labels)]
    class_idx = {name: i for i, name in enumerate(present)}
    pooled = np.zeros((len(present), len(present)), dtype=int)

    def run_fold(fold: int):
        test_mask = plan.assignments == fold
        train_rows = np.where(~test_mask)[0]
        test_rows = np.where(test_mask)[0]
        train_matrix = FeatureMatrix(
            matrix.feature_names, matrix.values[train_rows],
            [matrix.labels[i] for i in train_rows],
            [matrix.pr_ids[i] for i in train_rows])
        try:
            model = _train(train_matrix, learner, config)
        except Exception as exc:
            raise RuntimeError(f"training failed on fold {fold}: {exc}") from exc
        predicted = predict_classes(model, matrix.values[test_rows])
        fold_counts = np.zeros_like(pooled)
        for row, pred in zip(test_rows, predicted):
            fold_counts[class_idx[matrix.labels[row].value], class_idx[pred]] += 1
        return fold_counts

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fold_results = list(pool.map(run_fold, range(plan.k)))
    else:
        fold_results = [run_fold(fold) for fold in range(plan.k)]

    per_fold_f1 = []
    for fold_counts in fold_results:
        pooled += fold_counts
        fold_report = metrics_from_confusion(ConfusionMatrix(present, fold_counts))
        per_fold_f1.append(fold_report.weighted_f1)

    report = metrics_from_confusion(ConfusionMatrix(present, pooled))
    report.per_fold_f1 = per_fold_f1
    report.f1_spread = float(max(per_fold_f1) - min(per_fold_f1))
    return report


def compare_feature_sets(matrix_full: FeatureMatrix, matrix_reduced: FeatureMatrix,
                         learner: str, config, plan: FoldPlan,
                         jobs: int = 1) -> dict:
    if matrix_full.n_rows != matrix_reduced.n_rows:
        raise ValueError("matrices have different row counts")
    full = cross_validate(matrix_full, learner, config, plan, jobs=jobs)
    reduced = cross_validate(matrix_reduced, learner, config, plan, jobs=jobs)
    return {
        "f1_full": full.weighted_f1,
        "f1_reduced": reduced.weighted_f1,
        "delta": full.weighted_f1 - reduced.weighted_f1,
    }
