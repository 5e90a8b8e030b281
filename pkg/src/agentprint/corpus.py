"""PR data model and NDJSON corpus ingestion.

One JSON object per line:
{"id": str, "agent": str, "title": str, "body": str|null, "created_at": RFC3339,
 "commits": [{"message": str, "author": str}],
 "files": [{"path": str, "op": "added"|"modified"|"removed"|"renamed",
            "additions": int, "deletions": int, "patch": str|null}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum


class CorpusError(Exception):
    """Raised on unreadable input or, in strict mode, the first bad line."""


class AgentLabel(Enum):
    OPENAI_CODEX = "OpenAICodex"
    COPILOT = "Copilot"
    DEVIN = "Devin"
    CURSOR = "Cursor"
    CLAUDE_CODE = "ClaudeCode"

    @classmethod
    def parse(cls, raw: str) -> "AgentLabel":
        for label in cls:
            if label.value.lower() == raw.strip().lower():
                return label
        raise ValueError(f"unknown agent label: {raw!r}")


# frozen class order used everywhere (softmax indexing, reports, confusion)
CLASS_ORDER = [
    AgentLabel.OPENAI_CODEX,
    AgentLabel.COPILOT,
    AgentLabel.DEVIN,
    AgentLabel.CURSOR,
    AgentLabel.CLAUDE_CODE,
]


class FileOperation(Enum):
    ADDED = "added"
    MODIFIED = "modified"
    REMOVED = "removed"
    RENAMED = "renamed"


@dataclass(frozen=True)
class CommitRecord:
    message: str
    author_name: str = ""


@dataclass(frozen=True)
class FileChangeRecord:
    path: str
    operation: FileOperation
    additions: int
    deletions: int
    patch: str | None = None


@dataclass(frozen=True)
class PullRequestRecord:
    id: str
    agent_label: AgentLabel
    title: str
    body: str
    created_at: datetime
    commits: tuple[CommitRecord, ...]
    file_changes: tuple[FileChangeRecord, ...]


@dataclass
class IngestStats:
    loaded: int = 0
    skipped_incomplete: int = 0
    skipped_malformed: int = 0


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        raise ValueError(f"timestamp lacks UTC offset: {raw!r}")
    return ts.astimezone(timezone.utc)


def parse_record(obj: dict) -> PullRequestRecord:
    """Validate one decoded JSON object; raises ValueError on bad shape."""
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    pr_id = obj.get("id")
    if not isinstance(pr_id, str) or not pr_id:
        raise ValueError("id must be a non-empty string")
    agent = AgentLabel.parse(str(obj.get("agent", "")))
    title = obj.get("title")
    if not isinstance(title, str):
        raise ValueError("title must be a string")
    body = obj.get("body")
    if body is None:
        body = ""
    if not isinstance(body, str):
        raise ValueError("body must be a string or null")
    created_at = _parse_timestamp(str(obj.get("created_at", "")))

    commits = []
    raw_commits = obj.get("commits")
    if not isinstance(raw_commits, list):
        raise ValueError("commits must be a list")
    for c in raw_commits:
        if not isinstance(c, dict):
            raise ValueError("commit entry must be an object")
        msg = c.get("message")
        if msg is not None and not isinstance(msg, str):
            raise ValueError("commit message must be a string or null")
        commits.append(CommitRecord(message=msg if msg is not None else "",
                                    author_name=str(c.get("author", ""))))
    # keep null messages detectable for the incompleteness rule
    incomplete = not raw_commits or any(c.get("message") is None for c in raw_commits)

    files = []
    raw_files = obj.get("files", [])
    if not isinstance(raw_files, list):
        raise ValueError("files must be a list")
    for f in raw_files:
        if not isinstance(f, dict):
            raise ValueError("file entry must be an object")
        path = f.get("path")
        if not isinstance(path, str) or not path:
            raise ValueError("file path must be a non-empty string")
        op = FileOperation(str(f.get("op", "")))
        additions = f.get("additions", 0)
        deletions = f.get("deletions", 0)
        if not isinstance(additions, int) or not isinstance(deletions, int) \
                or additions < 0 or deletions < 0:
            raise ValueError("additions/deletions must be non-negative integers")
        patch = f.get("patch")
        if patch is not None and not isinstance(patch, str):
            raise ValueError("patch must be a string or null")
        files.append(FileChangeRecord(path=path, operation=op,
                                      additions=additions, deletions=deletions,
                                      patch=patch))

    record = PullRequestRecord(
        id=pr_id, agent_label=agent, title=title, body=body,
        created_at=created_at, commits=tuple(commits), file_changes=tuple(files),
    )
    if incomplete:
        raise IncompleteRecord(record)
    return record


class IncompleteRecord(Exception):
    """Structurally valid record lacking commit metadata; excluded from extraction."""

    def __init__(self, record: PullRequestRecord):
        super().__init__(f"incomplete commit metadata for PR {record.id}")
        self.record = record


def load_corpus(path, strict: bool = False) -> tuple[list[PullRequestRecord], IngestStats]:
    stats = IngestStats()
    records: list[PullRequestRecord] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                record = parse_record(obj)
            except IncompleteRecord:
                stats.skipped_incomplete += 1
                continue
            except (ValueError, TypeError) as exc:
                if strict:
                    raise CorpusError(f"line {lineno}: {exc}") from exc
                stats.skipped_malformed += 1
                continue
            records.append(record)
            stats.loaded += 1
    return records, stats


def class_counts(corpus: list[PullRequestRecord]) -> dict[AgentLabel, int]:
    counts = {label: 0 for label in CLASS_ORDER}
    for record in corpus:
        counts[record.agent_label] += 1
    return counts


def record_to_json(record: PullRequestRecord) -> dict:
    """Inverse of parse_record, for round-trip serialization."""
    return {
        "id": record.id,
        "agent": record.agent_label.value,
        "title": record.title,
        "body": record.body,
        "created_at": record.created_at.isoformat().replace("+00:00", "Z"),
        "commits": [{"message": c.message, "author": c.author_name}
                    for c in record.commits],
        "files": [{"path": f.path, "op": f.operation.value,
                   "additions": f.additions, "deletions": f.deletions,
                   "patch": f.patch}
                  for f in record.file_changes],
    }


def write_corpus(path, records: list[PullRequestRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), ensure_ascii=False) + "\n")
