"""Tree-ensemble learners: softmax gradient boosting and a Gini random forest.

Split search is exact greedy (sorted scan over every candidate threshold); at
corpus scale (tens of thousands of rows, ~50 features) this is tractable and
keeps results reproducible bit-for-bit for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import AgentLabel, CLASS_ORDER
from .features import FeatureMatrix

MODEL_FORMAT_VERSION = 1
REST_CLASS = "rest"

KIND_GBM = "gradient_boosted"
KIND_FOREST = "random_forest"


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class GbmConfig:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    min_child_weight: float = 1.0
    l2_reg: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise ValueError("n_rounds and max_depth must be >= 1")
        if not (0 < self.learning_rate <= 1):
            raise ValueError("learning_rate must be in (0, 1]")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 10
    bootstrap: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1:
            raise ValueError("n_trees and max_depth must be >= 1")


@dataclass
class TreeNode:
    """Internal split node or leaf. Missing-value routing is fixed to left
    (post-extraction features are never missing; kept for format stability)."""

    feature_index: int | None = None
    threshold: float = 0.0
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: object = None  # scalar (GBM) or per-class count list (forest)

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None

    def to_json(self) -> dict:
        if self.is_leaf:
            return {"v": self.value}
        return {"f": self.feature_index, "t": self.threshold, "g": self.gain,
                "l": self.left.to_json(), "r": self.right.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "TreeNode":
        if "v" in obj:
            return cls(value=obj["v"])
        return cls(feature_index=obj["f"], threshold=obj["t"], gain=obj["g"],
                   left=cls.from_json(obj["l"]), right=cls.from_json(obj["r"]))


@dataclass
class TreeEnsembleModel:
    kind: str
    classes: list[str]
    feature_names: list[str]
    trees: object  # GBM: list per class of tree lists; forest: flat tree list
    gain_totals: dict[str, float]
    config: dict
    train_loss: list[float] = field(default_factory=list)
    priors: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        if self.kind == KIND_GBM:
            trees = [[t.to_json() for t in per_class] for per_class in self.trees]
        else:
            trees = [t.to_json() for t in self.trees]
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "classes": self.classes,
            "feature_names": self.feature_names,
            "trees": trees,
            "gain_totals": self.gain_totals,
            "train_loss": self.train_loss,
            "priors": self.priors,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TreeEnsembleModel":
        if obj.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format: {obj.get('format_version')}")
        kind = obj["kind"]
        if kind == KIND_GBM:
            trees = [[TreeNode.from_json(t) for t in per_class]
                     for per_class in obj["trees"]]
        elif kind == KIND_FOREST:
            trees = [TreeNode.from_json(t) for t in obj["trees"]]
        else:
            raise ValueError(f"unknown model kind: {kind}")
        return cls(kind=kind, classes=obj["classes"],
                   feature_names=obj["feature_names"], trees=trees,
                   gain_totals=obj["gain_totals"], config=obj["config"],
                   train_loss=obj.get("train_loss", []),
                   priors=obj.get("priors", []))


def save_model(model: TreeEnsembleModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=1)
        fh.write("\n")


def load_model(path) -> TreeEnsembleModel:
    with open(path, "r", encoding="utf-8") as fh:
        return TreeEnsembleModel.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# split search

def best_regression_split(x: np.ndarray, g: np.ndarray, h: np.ndarray,
                          l2_reg: float, min_child_weight: float,
                          ) -> tuple[int, float, float] | None:
    """Exact best (feature, threshold, gain) for a second-order tree node.

    Rows with value <= threshold go left; the threshold is the left boundary
    value itself so routing never depends on midpoint rounding. Ties break to
    the lowest feature index, then the lowest threshold. Returns None when no
    split has positive gain and admissible child hessian mass.
    """
    n, p = x.shape
    if n < 2:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    gs = g[order]
    hs = h[order]
    gl = np.cumsum(gs, axis=0)[:-1]
    hl = np.cumsum(hs, axis=0)[:-1]
    g_total = gs.sum(axis=0)
    h_total = hs.sum(axis=0)
    gr = g_total - gl
    hr = h_total - hl
    base = g_total**2 / (h_total + l2_reg)
    gain = 0.5 * (gl**2 / (hl + l2_reg) + gr**2 / (hr + l2_reg) - base)
    valid = (xs[1:] > xs[:-1]) & (hl >= min_child_weight) & (hr >= min_child_weight)
    gain = np.where(valid, gain, -np.inf)
    split_pos = gain.argmax(axis=0)  # first max: lowest threshold within feature
    per_feature = gain[split_pos, np.arange(p)]
    feat = int(per_feature.argmax())  # first max: lowest feature index
    best = per_feature[feat]
    if not np.isfinite(best) or best <= 0:
        return None
    pos = int(split_pos[feat])
    return feat, float(xs[pos, feat]), float(best)


def _fit_regression_tree(x: np.ndarray, g: np.ndarray, h: np.ndarray,
                         config: GbmConfig, gain_accum: np.ndarray) -> TreeNode:
    def build(rows: np.ndarray, depth: int) -> TreeNode:
        g_sum = g[rows].sum()
        h_sum = h[rows].sum()
        leaf = TreeNode(value=float(-g_sum / (h_sum + config.l2_reg)
                                    * config.learning_rate))
        if depth >= config.max_depth or rows.size < 2:
            return leaf
        found = best_regression_split(x[rows], g[rows], h[rows],
                                      config.l2_reg, config.min_child_weight)
        if found is None:
            return leaf
        feat, threshold, gain = found
        mask = x[rows, feat] <= threshold
        gain_accum[feat] += gain
        return TreeNode(
            feature_index=feat, threshold=threshold, gain=gain,
            left=build(rows[mask], depth + 1),
            right=build(rows[~mask], depth + 1),
        )

    return build(np.arange(x.shape[0]), 0)


def tree_predict(node: TreeNode, x: np.ndarray, leaf_fn) -> np.ndarray:
    """Vectorized traversal; leaf_fn maps a leaf payload to an output row."""
    sample = leaf_fn(node if node.is_leaf else _first_leaf(node))
    out = np.zeros((x.shape[0],) + np.shape(sample), dtype=float)

    def walk(n: TreeNode, rows: np.ndarray) -> None:
        if rows.size == 0:
            return
        if n.is_leaf:
            out[rows] = leaf_fn(n)
            return
        mask = x[rows, n.feature_index] <= n.threshold
        walk(n.left, rows[mask])
        walk(n.right, rows[~mask])

    walk(node, np.arange(x.shape[0]))
    return out


def _first_leaf(node: TreeNode) -> TreeNode:
    while not node.is_leaf:
        node = node.left
    return node


# ---------------------------------------------------------------------------
# gradient boosting

def _softmax(margins: np.ndarray) -> np.ndarray:
    shifted = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _encode_labels(labels: list[AgentLabel]) -> tuple[np.ndarray, list[str]]:
    present = [c for c in CLASS_ORDER if c in set(labels)]
    index = {c: i for i, c in enumerate(present)}
    return np.array([index[l] for l in labels]), [c.value for c in present]


def _class_priors(y: np.ndarray, k: int) -> list[float]:
    return [float((y == i).mean()) for i in range(k)]


def train_gbm(matrix: FeatureMatrix, config: GbmConfig = GbmConfig(),
              ) -> TreeEnsembleModel:
    x = matrix.values
    if x.shape[0] == 0:
        raise TrainingError("empty training matrix")
    y, class_names = _encode_labels(matrix.labels)
    k = len(class_names)
    if k < 2:
        raise TrainingError("gradient boosting needs at least 2 classes")
    n, p = x.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    margins = np.zeros((n, k))
    gain_accum = np.zeros(p)
    trees: list[list[TreeNode]] = [[] for _ in range(k)]
    losses: list[float] = []
    for _ in range(config.n_rounds):
        probs = _softmax(margins)
        for c in range(k):
            g = probs[:, c] - onehot[:, c]
            h = probs[:, c] * (1.0 - probs[:, c])
            tree = _fit_regression_tree(x, g, h, config, gain_accum)
            trees[c].append(tree)
            margins[:, c] += tree_predict(tree, x, lambda leaf: leaf.value)
        probs = _softmax(margins)
        losses.append(float(-np.log(
            np.clip(probs[np.arange(n), y], 1e-15, None)).mean()))

    gain_totals = {matrix.feature_names[i]: float(gain_accum[i])
                   for i in range(p) if gain_accum[i] > 0}
    return TreeEnsembleModel(
        kind=KIND_GBM, classes=class_names,
        feature_names=list(matrix.feature_names), trees=trees,
        gain_totals=gain_totals, config=_config_dict(config),
        train_loss=losses, priors=_class_priors(y, k),
    )


def train_one_vs_rest(matrix: FeatureMatrix, target: AgentLabel,
                      config: GbmConfig = GbmConfig()) -> TreeEnsembleModel:
    """Binary logistic boosting of the target class against everything else."""
    x = matrix.values
    if x.shape[0] == 0:
        raise TrainingError("empty training matrix")
    y = np.array([1.0 if l == target else 0.0 for l in matrix.labels])
    if y.sum() == 0:
        raise TrainingError(f"target class {target.value} absent from matrix")
    n, p = x.shape
    margin = np.zeros(n)
    gain_accum = np.zeros(p)
    trees: list[TreeNode] = []
    losses: list[float] = []
    for _ in range(config.n_rounds):
        prob = 1.0 / (1.0 + np.exp(-margin))
        g = prob - y
        h = prob * (1.0 - prob)
        tree = _fit_regression_tree(x, g, h, config, gain_accum)
        trees.append(tree)
        margin += tree_predict(tree, x, lambda leaf: leaf.value)
        prob = np.clip(1.0 / (1.0 + np.exp(-margin)), 1e-15, 1 - 1e-15)
        losses.append(float(-(y * np.log(prob) + (1 - y) * np.log(1 - prob)).mean()))

    gain_totals = {matrix.feature_names[i]: float(gain_accum[i])
                   for i in range(p) if gain_accum[i] > 0}
    return TreeEnsembleModel(
        kind=KIND_GBM, classes=[target.value, REST_CLASS],
        feature_names=list(matrix.feature_names), trees=[trees, []],
        gain_totals=gain_totals, config=_config_dict(config),
        train_loss=losses,
        priors=[float(y.mean()), float(1 - y.mean())],
    )


# ---------------------------------------------------------------------------
# random forest

def _best_gini_split(x: np.ndarray, counts: np.ndarray, candidates: np.ndarray,
                     ) -> tuple[int, float, float] | None:
    """Best impurity-decrease split among candidate feature columns.

    counts is the per-row one-hot class matrix; returns (feature, threshold,
    decrease * n) or None when nothing improves purity.
    """
    n = x.shape[0]
    total = counts.sum(axis=0)
    parent_gini = 1.0 - ((total / n) ** 2).sum()
    best = None
    for feat in candidates:
        col = x[:, feat]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        cl = np.cumsum(counts[order], axis=0)[:-1]
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        cr = total - cl
        gini_l = 1.0 - ((cl / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((cr / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        decrease = np.where(xs[1:] > xs[:-1], parent_gini - weighted, -np.inf)
        pos = int(decrease.argmax())
        if decrease[pos] > 0 and (best is None or decrease[pos] > best[0]):
            best = (float(decrease[pos]), int(feat), float(xs[pos]))
    if best is None:
        return None
    dec, feat, threshold = best
    return feat, threshold, dec * n


def _fit_cart_tree(x: np.ndarray, y: np.ndarray, k: int, config: ForestConfig,
                   rng: np.random.Generator, gain_accum: np.ndarray) -> TreeNode:
    m = max(1, int(math.floor(math.sqrt(x.shape[1]))))
    onehot = np.zeros((x.shape[0], k))
    onehot[np.arange(x.shape[0]), y] = 1.0

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        node_counts = onehot[rows].sum(axis=0)
        leaf = TreeNode(value=node_counts.tolist())
        if depth >= config.max_depth or rows.size < 2 or (node_counts > 0).sum() < 2:
            return leaf
        candidates = np.sort(rng.choice(x.shape[1], size=m, replace=False))
        found = _best_gini_split(x[rows], onehot[rows], candidates)
        if found is None:
            return leaf
        feat, threshold, gain = found
        gain_accum[feat] += gain
        mask = x[rows, feat] <= threshold
        return TreeNode(feature_index=feat, threshold=threshold, gain=gain,
                        left=build(rows[mask], depth + 1),
                        right=build(rows[~mask], depth + 1))

    return build(np.arange(x.shape[0]), 0)


def train_forest(matrix: FeatureMatrix, config: ForestConfig = ForestConfig(),
                 ) -> TreeEnsembleModel:
    x = matrix.values
    if x.shape[0] == 0:
        raise TrainingError("empty training matrix")
    y, class_names = _encode_labels(matrix.labels)
    k = len(class_names)
    n, p = x.shape
    gain_accum = np.zeros(p)
    trees: list[TreeNode] = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(config.seed + t)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(_fit_cart_tree(x[rows], y[rows], k, config, rng, gain_accum))
    gain_totals = {matrix.feature_names[i]: float(gain_accum[i])
                   for i in range(p) if gain_accum[i] > 0}
    return TreeEnsembleModel(
        kind=KIND_FOREST, classes=class_names,
        feature_names=list(matrix.feature_names), trees=trees,
        gain_totals=gain_totals, config=_config_dict(config),
        priors=_class_priors(y, k),
    )


# ---------------------------------------------------------------------------
# prediction and importance

def predict_proba(model: TreeEnsembleModel, x: np.ndarray) -> np.ndarray:
    """Per-class probability rows for a (n, p) matrix in model feature order."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(model.feature_names):
        raise ValueError(f"expected {len(model.feature_names)} features, "
                         f"got {x.shape[1]}")
    if model.kind == KIND_GBM:
        if len(model.classes) == 2 and model.classes[1] == REST_CLASS:
            margin = np.zeros(x.shape[0])
            for tree in model.trees[0]:
                margin += tree_predict(tree, x, lambda leaf: leaf.value)
            p = 1.0 / (1.0 + np.exp(-margin))
            return np.column_stack([p, 1.0 - p])
        margins = np.zeros((x.shape[0], len(model.classes)))
        for c, per_class in enumerate(model.trees):
            for tree in per_class:
                margins[:, c] += tree_predict(tree, x, lambda leaf: leaf.value)
        return _softmax(margins)
    if model.kind == KIND_FOREST:
        votes = np.zeros((x.shape[0], len(model.classes)))
        for tree in model.trees:
            counts = tree_predict(tree, x, lambda leaf: np.asarray(leaf.value))
            winners = _argmax_with_priors(counts, model.priors)
            votes[np.arange(x.shape[0]), winners] += 1.0
        return votes / len(model.trees)
    raise ValueError(f"unknown model kind: {model.kind}")


def _argmax_with_priors(scores: np.ndarray, priors: list[float]) -> np.ndarray:
    """Row argmax with ties broken by class prior, then class order."""
    k = scores.shape[1]
    prior = np.asarray(priors if priors else [0.0] * k)
    # tiny lexicographic nudges: prior then earlier-class preference
    eps_prior = 1e-9 * prior
    eps_order = 1e-12 * (k - np.arange(k))
    return (scores + eps_prior + eps_order).argmax(axis=1)


def predict(model: TreeEnsembleModel, vector) -> np.ndarray:
    return predict_proba(model, np.asarray(vector, dtype=float).reshape(1, -1))[0]


def predict_classes(model: TreeEnsembleModel, x: np.ndarray) -> list[str]:
    probs = predict_proba(model, x)
    idx = _argmax_with_priors(probs, model.priors)
    return [model.classes[i] for i in idx]


def importance(model: TreeEnsembleModel, top_k: int | None = None,
               ) -> list[tuple[str, float]]:
    """Gain shares, descending, ties broken by feature registry order."""
    total = sum(model.gain_totals.values())
    if total <= 0:
        return []
    order = {name: i for i, name in enumerate(model.feature_names)}
    ranked = sorted(model.gain_totals.items(),
                    key=lambda kv: (-kv[1], order.get(kv[0], len(order))))
    shares = [(name, gain / total) for name, gain in ranked]
    return shares[:top_k] if top_k is not None else shares


def per_instance_contributions(model: TreeEnsembleModel, x: np.ndarray) -> np.ndarray:
    """Per-row feature attribution: realized split gain summed along each
    instance's decision paths across the whole ensemble."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    contrib = np.zeros((x.shape[0], len(model.feature_names)))

    def walk(node: TreeNode, rows: np.ndarray) -> None:
        if node.is_leaf or rows.size == 0:
            return
        contrib[rows, node.feature_index] += node.gain
        mask = x[rows, node.feature_index] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    all_rows = np.arange(x.shape[0])
    if model.kind == KIND_GBM:
        for per_class in model.trees:
            for tree in per_class:
                walk(tree, all_rows)
    else:
        for tree in model.trees:
            walk(tree, all_rows)
    return contrib


def _config_dict(config) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__}
