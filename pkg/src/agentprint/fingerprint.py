"""Agent fingerprints: global gain ranking plus per-agent one-vs-rest signatures."""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import AgentLabel, CLASS_ORDER
from .features import FeatureMatrix
from .learn import GbmConfig, TreeEnsembleModel, importance, train_gbm, train_one_vs_rest


@dataclass
class AgentFingerprint:
    agent: str
    top_features: list[dict]  # {"feature", "gain_share"}, descending
    model_ref: str
    rank_shift: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"agent": self.agent, "top_features": self.top_features,
                "model_ref": self.model_ref, "rank_shift": self.rank_shift}


@dataclass
class FingerprintReport:
    global_ranking: list[dict]
    per_agent: dict[str, AgentFingerprint]
    generated_at: str
    corpus_summary: dict

    def to_json(self) -> dict:
        return {
            "global_ranking": self.global_ranking,
            "per_agent": {a: fp.to_json() for a, fp in self.per_agent.items()},
            "generated_at": self.generated_at,
            "corpus_summary": self.corpus_summary,
        }


def _model_hash(model: TreeEnsembleModel) -> str:
    payload = json.dumps(model.to_json(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH keeps artifacts byte-reproducible when set
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def rank_shift(global_ranking: list[tuple[str, float]],
               top_features: list[dict]) -> list[dict]:
    """Global rank (1-based) of each top one-vs-rest feature; None when the
    feature never split in the multi-class model."""
    global_rank = {name: i + 1 for i, (name, _) in enumerate(global_ranking)}
    out = []
    for ovr_rank, entry in enumerate(top_features, start=1):
        name = entry["feature"]
        out.append({"feature": name, "global_rank": global_rank.get(name),
                    "ovr_rank": ovr_rank})
    return out


def build_fingerprints(matrix: FeatureMatrix, config: GbmConfig = GbmConfig(),
                       top_k: int = 3, jobs: int = 1) -> FingerprintReport:
    global_model = train_gbm(matrix, config)
    global_ranking = importance(global_model)
    present = [c for c in CLASS_ORDER if c in set(matrix.labels)]

    def build_one(label: AgentLabel) -> AgentFingerprint:
        try:
            model = train_one_vs_rest(matrix, label, config)
        except Exception as exc:
            raise RuntimeError(
                f"one-vs-rest training failed for {label.value}: {exc}") from exc
        top = [{"feature": name, "gain_share": share}
               for name, share in importance(model, top_k)]
        return AgentFingerprint(
            agent=label.value, top_features=top, model_ref=_model_hash(model),
            rank_shift=rank_shift(global_ranking, top))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fingerprints = list(pool.map(build_one, present))
    else:
        fingerprints = [build_one(label) for label in present]

    counts: dict[str, int] = {}
    for label in matrix.labels:
        counts[label.value] = counts.get(label.value, 0) + 1
    return FingerprintReport(
        global_ranking=[{"feature": n, "share": s} for n, s in global_ranking],
        per_agent={fp.agent: fp for fp in fingerprints},
        generated_at=_timestamp(),
        corpus_summary={"rows": matrix.n_rows, "class_counts": counts,
                        "n_features": len(matrix.feature_names)},
    )
