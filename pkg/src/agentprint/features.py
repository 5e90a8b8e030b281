"""The 53-feature vector: registry, per-record extraction, and matrix assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import (
    AgentLabel,
    CommitRecord,
    FileChangeRecord,
    PullRequestRecord,
)
from . import textparse
from .textparse import LineTag


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    category: str
    description: str
    unit: str


CATEGORY_COMMIT = "Commit"
CATEGORY_STRUCTURE = "PRStructure"
CATEGORY_CHANGES = "CodeChanges"
CATEGORY_PATCH = "PatchLevel"
CATEGORY_TEMPORAL = "Temporal"

REGISTRY: list[FeatureSpec] = [
    # commit message patterns (9)
    FeatureSpec("commit_count", CATEGORY_COMMIT, "Number of commits in the PR", "count"),
    FeatureSpec("conventional_commit_ratio", CATEGORY_COMMIT,
                "Fraction of commit messages with a conventional-commit header", "ratio"),
    FeatureSpec("msg_length_avg", CATEGORY_COMMIT, "Average commit message length", "chars"),
    FeatureSpec("msg_length_min", CATEGORY_COMMIT, "Shortest commit message length", "chars"),
    FeatureSpec("msg_length_max", CATEGORY_COMMIT, "Longest commit message length", "chars"),
    FeatureSpec("msg_length_std", CATEGORY_COMMIT,
                "Population std of commit message lengths", "chars"),
    FeatureSpec("multiline_commit_ratio", CATEGORY_COMMIT,
                "Fraction of commit messages with more than one non-blank line", "ratio"),
    FeatureSpec("capitalization_ratio", CATEGORY_COMMIT,
                "Fraction of commit messages whose first character is an uppercase letter",
                "ratio"),
    FeatureSpec("msg_word_count_avg", CATEGORY_COMMIT,
                "Average whitespace-delimited word count per commit message", "words"),
    # PR structure (9)
    FeatureSpec("title_length", CATEGORY_STRUCTURE, "Title length", "chars"),
    FeatureSpec("title_word_count", CATEGORY_STRUCTURE, "Title word count", "words"),
    FeatureSpec("body_length", CATEGORY_STRUCTURE, "Body length", "chars"),
    FeatureSpec("body_word_count", CATEGORY_STRUCTURE, "Body word count", "words"),
    FeatureSpec("checklist_count", CATEGORY_STRUCTURE,
                "Markdown checklist items in the body", "count"),
    FeatureSpec("code_block_count", CATEGORY_STRUCTURE,
                "Fenced code blocks in the body", "count"),
    FeatureSpec("link_count", CATEGORY_STRUCTURE,
                "Markdown links plus bare URLs in the body", "count"),
    FeatureSpec("bullet_count", CATEGORY_STRUCTURE,
                "Non-checklist bullet lines in the body", "count"),
    FeatureSpec("title_is_conventional", CATEGORY_STRUCTURE,
                "Title matches the conventional-commit header grammar", "flag"),
    # code changes (16)
    FeatureSpec("files_changed", CATEGORY_CHANGES, "Number of files touched", "count"),
    FeatureSpec("distinct_extension_count", CATEGORY_CHANGES,
                "Distinct file extensions touched", "count"),
    FeatureSpec("extension_entropy", CATEGORY_CHANGES,
                "Shannon entropy (nats) of the extension frequency distribution", "nats"),
    FeatureSpec("test_file_ratio", CATEGORY_CHANGES, "Fraction of files that are tests", "ratio"),
    FeatureSpec("config_file_ratio", CATEGORY_CHANGES,
                "Fraction of files that are configuration", "ratio"),
    FeatureSpec("doc_file_ratio", CATEGORY_CHANGES,
                "Fraction of files that are documentation", "ratio"),
    FeatureSpec("avg_dir_depth", CATEGORY_CHANGES, "Mean directory depth of touched paths",
                "levels"),
    FeatureSpec("max_dir_depth", CATEGORY_CHANGES, "Max directory depth of touched paths",
                "levels"),
    FeatureSpec("added_file_ratio", CATEGORY_CHANGES, "Fraction of file operations = added",
                "ratio"),
    FeatureSpec("modified_file_ratio", CATEGORY_CHANGES,
                "Fraction of file operations = modified", "ratio"),
    FeatureSpec("removed_file_ratio", CATEGORY_CHANGES,
                "Fraction of file operations = removed", "ratio"),
    FeatureSpec("renamed_file_ratio", CATEGORY_CHANGES,
                "Fraction of file operations = renamed", "ratio"),
    FeatureSpec("total_additions", CATEGORY_CHANGES, "Total added lines (metadata)", "lines"),
    FeatureSpec("total_deletions", CATEGORY_CHANGES, "Total deleted lines (metadata)", "lines"),
    FeatureSpec("addition_deletion_ratio", CATEGORY_CHANGES,
                "additions / (additions + deletions)", "ratio"),
    FeatureSpec("change_gini", CATEGORY_CHANGES,
                "Gini coefficient of per-file changed-line counts", "gini"),
    # patch-level code characteristics (15)
    FeatureSpec("added_line_count", CATEGORY_PATCH, "Added lines across all patches", "lines"),
    FeatureSpec("removed_line_count", CATEGORY_PATCH, "Removed lines across all patches",
                "lines"),
    FeatureSpec("added_line_length_avg", CATEGORY_PATCH, "Average added-line length", "chars"),
    FeatureSpec("added_line_length_max", CATEGORY_PATCH, "Max added-line length", "chars"),
    FeatureSpec("added_line_length_std", CATEGORY_PATCH,
                "Population std of added-line lengths", "chars"),
    FeatureSpec("trailing_whitespace_ratio", CATEGORY_PATCH,
                "Fraction of added lines with trailing whitespace", "ratio"),
    FeatureSpec("tab_indent_ratio", CATEGORY_PATCH,
                "Tab-indented fraction of indented added lines", "ratio"),
    FeatureSpec("avg_indent_width", CATEGORY_PATCH,
                "Mean leading-space count among space-indented added lines", "chars"),
    FeatureSpec("comment_density", CATEGORY_PATCH,
                "Comment-tagged added lines / added lines", "ratio"),
    FeatureSpec("import_density", CATEGORY_PATCH,
                "Import-tagged added lines / added lines", "ratio"),
    FeatureSpec("function_decl_count", CATEGORY_PATCH,
                "Added lines tagged as function declarations", "count"),
    FeatureSpec("type_decl_count", CATEGORY_PATCH,
                "Added lines tagged as type declarations", "count"),
    FeatureSpec("conditional_count", CATEGORY_PATCH,
                "Added lines tagged as conditionals", "count"),
    FeatureSpec("loop_count", CATEGORY_PATCH, "Added lines tagged as loops", "count"),
    FeatureSpec("blank_line_ratio", CATEGORY_PATCH, "Blank fraction of added lines", "ratio"),
    # temporal (4)
    FeatureSpec("hour_of_day", CATEGORY_TEMPORAL, "Submission hour, UTC", "hour"),
    FeatureSpec("is_weekend", CATEGORY_TEMPORAL, "Submitted on Saturday/Sunday UTC", "flag"),
    FeatureSpec("is_business_hours", CATEGORY_TEMPORAL,
                "Submitted 09:00-16:59 UTC on a weekday", "flag"),
    FeatureSpec("day_of_week", CATEGORY_TEMPORAL, "Day of week, Monday=0", "day"),
]

FEATURE_NAMES = [spec.name for spec in REGISTRY]
assert len(FEATURE_NAMES) == 53
assert len(set(FEATURE_NAMES)) == 53

_CATEGORY_COUNTS = {CATEGORY_COMMIT: 9, CATEGORY_STRUCTURE: 9, CATEGORY_CHANGES: 16,
                    CATEGORY_PATCH: 15, CATEGORY_TEMPORAL: 4}
for _cat, _n in _CATEGORY_COUNTS.items():
    assert sum(1 for s in REGISTRY if s.category == _cat) == _n


def feature_dictionary() -> list[dict]:
    return [{"name": s.name, "category": s.category,
             "description": s.description, "unit": s.unit} for s in REGISTRY]


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def change_gini(values) -> float:
    """Gini coefficient via the sorted-rank formula; 0 for empty/all-zero input."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    total = x.sum()
    if n == 0 or total == 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float(((2 * ranks - n - 1) * x).sum() / (n * total))


def extract_commit_features(commits: list[CommitRecord]) -> list[float]:
    if not commits:
        return [0.0] * 9
    shapes = [textparse.parse_commit_message(c.message) for c in commits]
    n = len(shapes)
    lengths = np.array([s.total_length for s in shapes], dtype=float)
    words = [len(c.message.split()) for c in commits]
    return [
        float(n),
        sum(s.is_conventional for s in shapes) / n,
        float(lengths.mean()),
        float(lengths.min()),
        float(lengths.max()),
        float(lengths.std()),
        sum(s.is_multiline for s in shapes) / n,
        sum(s.first_char_capitalized for s in shapes) / n,
        sum(words) / n,
    ]


def extract_structure_features(title: str, body: str) -> list[float]:
    struct = textparse.parse_body(body)
    title_shape = textparse.parse_commit_message(title)
    return [
        float(len(title)),
        float(len(title.split())),
        float(struct.length_chars),
        float(struct.word_count),
        float(struct.checklist_items),
        float(struct.fenced_code_blocks),
        float(struct.links),
        float(struct.bullet_lines),
        1.0 if title_shape.is_conventional else 0.0,
    ]


def _extension_of(path: str) -> str:
    base = path.rsplit("/", 1)[-1]
    if "." in base[1:]:
        return base.rsplit(".", 1)[-1].lower()
    return ""


_TEST_COMPONENTS = {"test", "tests", "spec"}
_CONFIG_EXTENSIONS = {"json", "yaml", "yml", "toml", "ini", "cfg", "conf"}
_DOC_EXTENSIONS = {"md", "rst", "txt", "adoc"}


def _file_kind(path: str) -> str:
    """One of test/doc/config/other; precedence test > doc > config."""
    parts = path.lower().split("/")
    base = parts[-1]
    ext = _extension_of(path)
    stem = base.rsplit(".", 1)[0] if "." in base[1:] else base
    is_test = (any(p in _TEST_COMPONENTS for p in parts[:-1])
               or stem.startswith("test_") or stem.endswith("_test")
               or ".spec." in base)
    if is_test:
        return "test"
    if ext in _DOC_EXTENSIONS or "docs" in parts[:-1]:
        return "doc"
    if ext in _CONFIG_EXTENSIONS or base.startswith("."):
        return "config"
    return "other"


def extract_change_features(files: list[FileChangeRecord]) -> list[float]:
    n = len(files)
    if n == 0:
        return [0.0] * 16
    extensions = [_extension_of(f.path) for f in files]
    counts: dict[str, int] = {}
    for ext in extensions:
        counts[ext] = counts.get(ext, 0) + 1
    entropy = -sum((c / n) * math.log(c / n) for c in counts.values())
    kinds = [_file_kind(f.path) for f in files]
    depths = [f.path.count("/") for f in files]
    ops = [f.operation.value for f in files]
    additions = sum(f.additions for f in files)
    deletions = sum(f.deletions for f in files)
    per_file = [f.additions + f.deletions for f in files]
    return [
        float(n),
        float(len(counts)),
        float(entropy),
        kinds.count("test") / n,
        kinds.count("config") / n,
        kinds.count("doc") / n,
        sum(depths) / n,
        float(max(depths)),
        ops.count("added") / n,
        ops.count("modified") / n,
        ops.count("removed") / n,
        ops.count("renamed") / n,
        float(additions),
        float(deletions),
        _safe_ratio(additions, additions + deletions),
        change_gini(per_file),
    ]


def extract_patch_features(files: list[FileChangeRecord]) -> list[float]:
    added: list[str] = []
    tags: list[set[LineTag]] = []
    removed_count = 0
    for f in files:
        if not f.patch:
            continue
        shape = textparse.parse_patch(f.patch)
        removed_count += len(shape.removed_lines)
        ext = _extension_of(f.path)
        for line in shape.added_lines:
            added.append(line)
            tags.append(textparse.classify_code_line(line, ext))
    n = len(added)
    if n == 0:
        return [0.0] * 15
    lengths = np.array([len(l) for l in added], dtype=float)
    trailing = sum(1 for l in added if l != l.rstrip())
    indented = [l for l in added if l[:1] in (" ", "\t")]
    tab_indented = sum(1 for l in indented if l.startswith("\t"))
    space_indent_widths = [len(l) - len(l.lstrip(" "))
                           for l in indented if l.startswith(" ")]

    def tag_count(tag: LineTag) -> int:
        return sum(1 for t in tags if tag in t)

    return [
        float(n),
        float(removed_count),
        float(lengths.mean()),
        float(lengths.max()),
        float(lengths.std()),
        trailing / n,
        _safe_ratio(tab_indented, len(indented)),
        (sum(space_indent_widths) / len(space_indent_widths)
         if space_indent_widths else 0.0),
        tag_count(LineTag.COMMENT) / n,
        tag_count(LineTag.IMPORT) / n,
        float(tag_count(LineTag.FUNCTION_DECL)),
        float(tag_count(LineTag.TYPE_DECL)),
        float(tag_count(LineTag.CONDITIONAL)),
        float(tag_count(LineTag.LOOP)),
        tag_count(LineTag.BLANK) / n,
    ]


def extract_temporal_features(created_at) -> list[float]:
    weekday = created_at.weekday()
    hour = created_at.hour
    is_weekend = weekday >= 5
    business = (not is_weekend) and 9 <= hour <= 16
    return [float(hour), 1.0 if is_weekend else 0.0,
            1.0 if business else 0.0, float(weekday)]


def extract_features(record: PullRequestRecord) -> list[float]:
    return (extract_commit_features(list(record.commits))
            + extract_structure_features(record.title, record.body)
            + extract_change_features(list(record.file_changes))
            + extract_patch_features(list(record.file_changes))
            + extract_temporal_features(record.created_at))


@dataclass
class FeatureMatrix:
    """Rows of feature values plus aligned labels and PR ids.

    feature_names is the full registry for freshly extracted matrices and a
    subset after reduction; column order always follows registry order.
    """

    feature_names: list[str]
    values: np.ndarray  # shape (n_rows, n_features)
    labels: list[AgentLabel]
    pr_ids: list[str]

    def restrict(self, names: list[str]) -> "FeatureMatrix":
        index = {name: i for i, name in enumerate(self.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise KeyError(f"features not in matrix: {missing}")
        cols = [index[n] for n in names]
        return FeatureMatrix(list(names), self.values[:, cols],
                             list(self.labels), list(self.pr_ids))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


def build_matrix(corpus: list[PullRequestRecord]) -> FeatureMatrix:
    values = np.array([extract_features(r) for r in corpus], dtype=float)
    if len(corpus) == 0:
        values = values.reshape(0, len(FEATURE_NAMES))
    return FeatureMatrix(
        feature_names=list(FEATURE_NAMES),
        values=values,
        labels=[r.agent_label for r in corpus],
        pr_ids=[r.id for r in corpus],
    )


def _format_value(v: float) -> str:
    return format(v, ".12g")


def write_matrix_csv(matrix: FeatureMatrix, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(matrix.feature_names + ["label", "pr_id"]) + "\n")
        for row, label, pr_id in zip(matrix.values, matrix.labels, matrix.pr_ids):
            cells = [_format_value(v) for v in row]
            fh.write(",".join(cells + [label.value, pr_id]) + "\n")


def read_matrix_csv(path) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty feature matrix file: {path}")
    header = lines[0].split(",")
    if header[-2:] != ["label", "pr_id"]:
        raise ValueError("feature CSV must end with label,pr_id columns")
    names = header[:-2]
    rows = []
    labels = []
    pr_ids = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ValueError(f"row has {len(cells)} cells, expected {len(header)}")
        rows.append([float(c) for c in cells[:-2]])
        labels.append(AgentLabel.parse(cells[-2]))
        pr_ids.append(cells[-1])
    values = np.array(rows, dtype=float) if rows else np.zeros((0, len(names)))
    return FeatureMatrix(names, values, labels, pr_ids)
