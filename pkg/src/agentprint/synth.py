"""Synthetic labeled PR corpus with injected per-agent style signatures.

Each agent gets exactly one strong signature; every other behavioral axis is
drawn from the same distribution for all agents so the signature feature is
what a classifier must find:

    OpenAICodex -> multiline commit messages      (multiline_commit_ratio)
    Copilot     -> changes piled into one file    (change_gini)
    Devin       -> conventional commit headers    (conventional_commit_ratio)
    Cursor      -> bullet-heavy PR bodies         (bullet_count)
    ClaudeCode  -> comment-dense patches          (comment_density)
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import (
    AgentLabel,
    CLASS_ORDER,
    CommitRecord,
    FileChangeRecord,
    FileOperation,
    PullRequestRecord,
)

SIGNATURE_FEATURES = {
    AgentLabel.OPENAI_CODEX: "multiline_commit_ratio",
    AgentLabel.COPILOT: "change_gini",
    AgentLabel.DEVIN: "conventional_commit_ratio",
    AgentLabel.CURSOR: "bullet_count",
    AgentLabel.CLAUDE_CODE: "comment_density",
}

_VOCAB = (
    "update handler config parser stream token buffer cache index route "
    "schema worker queue batch merge filter export client server session "
    "retry limit module metric branch deploy window record field value"
).split()

_CODE_EXTENSIONS = ["py", "js", "go"]
_OTHER_EXTENSIONS = ["md", "json", "txt"]
_CONVENTIONAL_TYPES = ["feat", "fix", "refactor", "chore", "docs"]

_COMMENT_PREFIX = {"py": "# ", "js": "// ", "go": "// "}


def _words(rng: np.random.Generator, n: int) -> str:
    return " ".join(rng.choice(_VOCAB) for _ in range(n))


def _sentence(rng: np.random.Generator) -> str:
    return _words(rng, int(rng.integers(4, 10)))


def _commit_message(rng: np.random.Generator, agent: AgentLabel) -> str:
    # word budget is drawn independently of line structure so message length
    # carries no agent signal; only the line layout differs
    budget = int(rng.integers(10, 28))
    conventional = rng.random() < (0.9 if agent == AgentLabel.DEVIN else 0.15)
    multiline = rng.random() < (0.85 if agent == AgentLabel.OPENAI_CODEX else 0.08)
    capitalize = rng.random() < 0.5
    head_words = int(rng.integers(3, 7))
    if conventional:
        ctype = str(rng.choice(_CONVENTIONAL_TYPES))
        if capitalize:
            ctype = ctype.capitalize()
        header = f"{ctype}: {_words(rng, head_words)}"
    else:
        header = _words(rng, head_words)
        if capitalize:
            header = header[0].upper() + header[1:]
    rest = [str(rng.choice(_VOCAB)) for _ in range(budget - head_words)]
    if not multiline:
        return (header + " " + " ".join(rest)).strip()
    n_extra = int(rng.integers(1, 4))
    chunks = np.array_split(np.array(rest, dtype=object), n_extra)
    extra = "\n".join(" ".join(c) for c in chunks if len(c))
    return header + "\n\n" + extra


def _body(rng: np.random.Generator, agent: AgentLabel) -> str:
    total_lines = int(rng.integers(12, 25))
    bullets = int(rng.integers(8, 17) if agent == AgentLabel.CURSOR
                  else rng.integers(0, 4))
    bullets = min(bullets, total_lines - 1)
    lines = [f"- {_sentence(rng)}" for _ in range(bullets)]
    lines += [_sentence(rng) for _ in range(total_lines - bullets)]
    order = rng.permutation(len(lines))
    lines = [lines[i] for i in order]
    for _ in range(int(rng.integers(0, 3))):
        lines.insert(int(rng.integers(0, len(lines) + 1)),
                     f"see [ref](https://example.com/{rng.integers(100)})")
    for _ in range(int(rng.integers(0, 3))):
        lines.insert(int(rng.integers(0, len(lines) + 1)),
                     f"- [{'x' if rng.random() < 0.5 else ' '}] {_sentence(rng)}")
    if rng.random() < 0.4:
        lines += ["```", "example()", "```"]
    return "\n".join(lines)


def _patch(rng: np.random.Generator, ext: str, agent: AgentLabel) -> str:
    n_lines = int(rng.integers(10, 30))
    comment_frac = (rng.uniform(0.55, 0.75) if agent == AgentLabel.CLAUDE_CODE
                    else rng.uniform(0.0, 0.10))
    prefix = _COMMENT_PREFIX.get(ext, "# ")
    added = []
    for _ in range(n_lines):
        roll = rng.random()
        if roll < comment_frac:
            added.append(prefix + _words(rng, int(rng.integers(2, 5))))
        elif roll < comment_frac + 0.12:
            added.append(f"if {rng.choice(_VOCAB)}:")
        elif roll < comment_frac + 0.18:
            added.append(f"for item in {rng.choice(_VOCAB)}:")
        else:
            indent = "    " if rng.random() < 0.4 else ""
            added.append(f"{indent}{rng.choice(_VOCAB)} = "
                         f"{rng.choice(_VOCAB)}({rng.choice(_VOCAB)})")
    hunk = [f"@@ -1,{max(1, n_lines // 2)} +1,{n_lines} @@"]
    hunk += ["+" + line for line in added]
    if rng.random() < 0.3:
        hunk.append(" " + _sentence(rng))
    return "\n".join(hunk)


def _files(rng: np.random.Generator, agent: AgentLabel) -> list[FileChangeRecord]:
    m = int(rng.integers(3, 9))
    total_changes = int(rng.integers(60, 400))
    if agent == AgentLabel.COPILOT:
        dominant = rng.uniform(0.85, 0.95)
        weights = np.full(m, (1 - dominant) / (m - 1))
        weights[0] = dominant
    else:
        weights = rng.uniform(0.8, 1.2, size=m)
        weights /= weights.sum()
    per_file = np.maximum((weights * total_changes).astype(int), 1)
    files = []
    for i, changes in enumerate(per_file):
        is_code = rng.random() < 0.7
        ext = str(rng.choice(_CODE_EXTENSIONS if is_code else _OTHER_EXTENSIONS))
        depth = int(rng.integers(0, 4))
        dirs = [str(rng.choice(["src", "lib", "app", "internal", "docs"]))
                for _ in range(depth)]
        path = "/".join(dirs + [f"{rng.choice(_VOCAB)}_{i}.{ext}"])
        additions = int(rng.integers(0, changes + 1))
        deletions = int(changes) - additions
        patch = _patch(rng, ext, agent) if is_code and rng.random() < 0.8 else None
        files.append(FileChangeRecord(
            path=path,
            operation=FileOperation(
                str(rng.choice(["added", "modified", "removed", "renamed"],
                               p=[0.25, 0.6, 0.1, 0.05]))),
            additions=additions, deletions=deletions, patch=patch))
    return files


def generate_record(rng: np.random.Generator, agent: AgentLabel,
                    pr_id: str) -> PullRequestRecord:
    created = (datetime(2025, 1, 1, tzinfo=timezone.utc)
               + timedelta(minutes=int(rng.integers(0, 365 * 24 * 60))))
    title = _words(rng, int(rng.integers(3, 9)))
    if rng.random() < 0.3:
        title = f"{rng.choice(_CONVENTIONAL_TYPES)}: {title}"
    commits = tuple(CommitRecord(message=_commit_message(rng, agent),
                                 author_name=f"{agent.value.lower()}[bot]")
                    for _ in range(int(rng.integers(1, 6))))
    return PullRequestRecord(
        id=pr_id, agent_label=agent, title=title,
        body=_body(rng, agent), created_at=created,
        commits=commits, file_changes=tuple(_files(rng, agent)),
    )


def generate_corpus(n_per_agent: int = 500, seed: int = 7,
                    ) -> list[PullRequestRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for agent in CLASS_ORDER:
        for i in range(n_per_agent):
            records.append(generate_record(rng, agent, f"pr-{agent.value}-{i}"))
    order = rng.permutation(len(records))
    return [records[i] for i in order]
