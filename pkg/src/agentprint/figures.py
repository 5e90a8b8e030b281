"""Matplotlib renderings of the evaluation and fingerprint reports.

Figures are written next to the delimited artifacts; all numeric content comes
from the same report objects, so the plots never disagree with the CSV/JSON.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import ConfusionMatrix
from .fingerprint import FingerprintReport


def render_confusion_matrix(confusion: ConfusionMatrix, path) -> None:
    counts = confusion.counts.astype(float)
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(confusion.classes)))
    ax.set_yticks(range(len(confusion.classes)))
    ax.set_xticklabels(confusion.classes, rotation=30, ha="right")
    ax.set_yticklabels(confusion.classes)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    threshold = counts.max() / 2 if counts.max() else 0.5
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    color="white" if counts[i, j] > threshold else "black",
                    fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_importance(ranking: list[dict], path, title: str,
                      top_k: int = 15) -> None:
    top = ranking[:top_k]
    names = [e["feature"] for e in top][::-1]
    shares = [e.get("share", e.get("gain_share", 0.0)) for e in top][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(top) + 1.5))
    ax.barh(names, shares, color="#4878a8")
    ax.set_xlabel("gain share")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fingerprints(report: FingerprintReport, path) -> None:
    agents = list(report.per_agent)
    fig, axes = plt.subplots(1, len(agents),
                             figsize=(3.0 * len(agents), 3.2), squeeze=False)
    for ax, agent in zip(axes[0], agents):
        fp = report.per_agent[agent]
        names = [e["feature"] for e in fp.top_features][::-1]
        shares = [e["gain_share"] for e in fp.top_features][::-1]
        ax.barh(names, shares, color="#4878a8")
        ax.set_title(agent, fontsize=10)
        ax.tick_params(labelsize=7)
        ax.set_xlabel("gain share", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
