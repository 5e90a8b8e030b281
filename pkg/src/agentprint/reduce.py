"""Two-step feature reduction: correlation clustering then R^2 redundancy,
plus the events-per-variable adequacy table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .corpus import AgentLabel
from .features import FeatureMatrix


@dataclass(frozen=True)
class ReductionConfig:
    correlation_threshold: float = 0.70
    r2_threshold: float = 0.90
    epv_minimum: float = 10.0

    def __post_init__(self):
        if not (0 < self.correlation_threshold <= 1):
            raise ValueError("correlation_threshold must be in (0, 1]")
        if not (0 < self.r2_threshold <= 1):
            raise ValueError("r2_threshold must be in (0, 1]")
        if self.epv_minimum <= 0:
            raise ValueError("epv_minimum must be positive")


@dataclass
class FeatureCluster:
    members: list[str]
    representative: str


@dataclass
class ReductionReport:
    clusters: list[FeatureCluster]
    dropped_step1: list[str]
    r2_scores: dict[str, float]
    dropped_step2: list[str]
    kept: list[str]
    epv_table: dict[str, dict]
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "clusters": [{"members": c.members, "representative": c.representative}
                         for c in self.clusters],
            "dropped_step1": self.dropped_step1,
            "r2_scores": self.r2_scores,
            "dropped_step2": self.dropped_step2,
            "kept": self.kept,
            "epv_table": self.epv_table,
        }


def correlation_matrix(values: np.ndarray) -> np.ndarray:
    """Pearson correlation with constant columns mapped to 0 (1 on diagonal)."""
    if values.shape[0] < 2:
        raise ValueError("correlation requires at least 2 rows")
    std = values.std(axis=0)
    constant = std == 0
    safe = values.copy()
    # give constant columns unit variance noise-free placeholder to avoid 0/0
    safe[:, constant] = 0.0
    safe[0, constant] = 1.0
    corr = np.corrcoef(safe, rowvar=False)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    return corr


def cluster_features(corr: np.ndarray, threshold: float) -> list[list[int]]:
    """Average-linkage clusters on distance 1 - |rho|, cut at 1 - threshold."""
    p = corr.shape[0]
    if p == 1:
        return [[0]]
    dist = 1.0 - np.abs(corr)
    np.fill_diagonal(dist, 0.0)
    dist = np.clip((dist + dist.T) / 2.0, 0.0, None)
    z = linkage(squareform(dist, checks=False), method="average")
    assignments = fcluster(z, t=1.0 - threshold, criterion="distance")
    clusters: dict[int, list[int]] = {}
    for idx, cid in enumerate(assignments):
        clusters.setdefault(cid, []).append(idx)
    # deterministic order: by smallest member index
    return sorted(clusters.values(), key=lambda c: c[0])


def select_representatives(clusters: list[list[int]], corr: np.ndarray,
                           ) -> tuple[list[int], list[int], list[tuple[list[int], int]]]:
    """Keep, per cluster, the member least correlated with everything outside.

    Returns (kept indices, dropped indices, [(members, representative)]).
    Ties break toward the lowest registry index.
    """
    abs_corr = np.abs(corr)
    kept: list[int] = []
    dropped: list[int] = []
    annotated: list[tuple[list[int], int]] = []
    all_idx = np.arange(corr.shape[0])
    for members in clusters:
        if len(members) == 1:
            rep = members[0]
        else:
            outside = np.setdiff1d(all_idx, members)
            if outside.size == 0:
                rep = members[0]
            else:
                means = [abs_corr[m, outside].mean() for m in members]
                rep = members[int(np.argmin(means))]
        kept.append(rep)
        dropped.extend(m for m in members if m != rep)
        annotated.append((members, rep))
    return sorted(kept), sorted(dropped), annotated


def r_squared(values: np.ndarray, target_col: int, damping: float = 1e-8) -> float:
    """R^2 of OLS (with intercept) predicting one column from all others.

    Normal equations are damped by a tiny ridge term for rank safety.
    Constant targets yield 0 by convention.
    """
    y = values[:, target_col]
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        return 0.0
    others = np.delete(values, target_col, axis=1)
    x = np.column_stack([np.ones(len(y)), others])
    xtx = x.T @ x + damping * np.eye(x.shape[1])
    beta = np.linalg.solve(xtx, x.T @ y)
    sse = float(((y - x @ beta) ** 2).sum())
    return min(1.0 - sse / sst, 1.0)


def r2_redundancy(matrix: FeatureMatrix, threshold: float,
                  ) -> tuple[dict[str, float], list[str]]:
    """Greedy descending-R^2 elimination with recomputation after each drop."""
    names = list(matrix.feature_names)
    values = matrix.values.copy()
    if values.shape[0] <= len(names) + 1:
        raise ValueError("need more rows than features for redundancy analysis")
    if values.std(axis=0).max() == 0:
        raise ValueError("all features are constant")
    scores: dict[str, float] = {}
    dropped: list[str] = []
    while len(names) > 1:
        r2s = np.array([r_squared(values, j) for j in range(len(names))])
        for name, r2 in zip(names, r2s):
            scores[name] = float(r2)
        worst = int(np.argmax(r2s))
        if r2s[worst] <= threshold:
            break
        dropped.append(names[worst])
        names.pop(worst)
        values = np.delete(values, worst, axis=1)
    return scores, dropped


def epv_check(counts: dict[AgentLabel, int], n_features: int,
              epv_minimum: float = 10.0) -> dict[str, dict]:
    if n_features <= 0:
        raise ValueError("n_features must be positive")
    table = {}
    for label, samples in counts.items():
        epv = samples / n_features
        table[label.value] = {"samples": samples, "epv": epv,
                              "flagged": epv < epv_minimum}
    return table


def reduce_features(matrix: FeatureMatrix, config: ReductionConfig = ReductionConfig(),
                    ) -> ReductionReport:
    """Full pipeline: cluster -> representatives -> R^2 elimination -> EPV."""
    corr = correlation_matrix(matrix.values)
    clusters = cluster_features(corr, config.correlation_threshold)
    kept_idx, dropped_idx, annotated = select_representatives(clusters, corr)
    names = matrix.feature_names
    kept_names = [names[i] for i in kept_idx]
    dropped_step1 = [names[i] for i in dropped_idx]

    step1_matrix = matrix.restrict(kept_names)
    r2_scores, dropped_step2 = r2_redundancy(step1_matrix, config.r2_threshold)
    kept_final = [n for n in kept_names if n not in set(dropped_step2)]

    counts: dict[AgentLabel, int] = {}
    for label in matrix.labels:
        counts[label] = counts.get(label, 0) + 1
    epv_table = epv_check(counts, len(kept_final), config.epv_minimum) if counts else {}

    return ReductionReport(
        clusters=[FeatureCluster([names[m] for m in members], names[rep])
                  for members, rep in annotated],
        dropped_step1=dropped_step1,
        r2_scores=r2_scores,
        dropped_step2=dropped_step2,
        kept=kept_final,
        epv_table=epv_table,
        config={"correlation_threshold": config.correlation_threshold,
                "r2_threshold": config.r2_threshold,
                "epv_minimum": config.epv_minimum},
    )
