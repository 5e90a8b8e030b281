"""Lexical parsers for commit messages, PR bodies, and unified-diff fragments.

Everything here is a pure function on strings; no state is kept between calls,
so partial or malformed input degrades gracefully instead of raising.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

CONVENTIONAL_TYPES = (
    "feat", "fix", "docs", "style", "refactor", "perf",
    "test", "build", "ci", "chore", "revert",
)

# type, optional (scope), optional breaking-change !, then ": " and a
# non-empty description; only the type is case-insensitive.
_CONVENTIONAL_RE = re.compile(
    r"^(?:" + "|".join(CONVENTIONAL_TYPES) + r")"
    r"(?:\([^()]+\))?!?: \S",
    re.IGNORECASE,
)

_CHECKLIST_RE = re.compile(r"^\s*- \[( |x)\]", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*[-*+] ")
_INLINE_LINK_RE = re.compile(r"\[[^\]]*\]\([^)]*\)")
_BARE_URL_RE = re.compile(r"https?://\S+")
_FENCE_RE = re.compile(r"^\s*```")


@dataclass(frozen=True)
class CommitMessageShape:
    first_line: str
    nonblank_line_count: int
    total_length: int
    is_multiline: bool
    is_conventional: bool
    first_char_capitalized: bool


@dataclass(frozen=True)
class BodyStructure:
    length_chars: int
    word_count: int
    checklist_items: int
    fenced_code_blocks: int
    links: int
    bullet_lines: int


@dataclass(frozen=True)
class PatchShape:
    added_lines: list[str]
    removed_lines: list[str]
    context_line_count: int


class LineTag(Enum):
    COMMENT = "comment"
    IMPORT = "import"
    FUNCTION_DECL = "function_decl"
    TYPE_DECL = "type_decl"
    CONDITIONAL = "conditional"
    LOOP = "loop"
    BLANK = "blank"
    OTHER = "other"


def parse_commit_message(message: str) -> CommitMessageShape:
    lines = message.split("\n")
    first_line = lines[0] if lines else ""
    nonblank = sum(1 for ln in lines if ln.strip())
    # messages starting with a non-letter count as non-capitalized
    capitalized = first_line[:1].isalpha() and first_line[:1].isupper()
    return CommitMessageShape(
        first_line=first_line,
        nonblank_line_count=nonblank,
        total_length=len(message),
        is_multiline=nonblank > 1,
        is_conventional=bool(_CONVENTIONAL_RE.match(first_line)),
        first_char_capitalized=capitalized,
    )


def parse_body(body: str) -> BodyStructure:
    lines = body.split("\n")
    checklist = 0
    bullets = 0
    links = 0
    fence_lines = 0
    in_fence = False
    for line in lines:
        if _FENCE_RE.match(line):
            fence_lines += 1
            in_fence = not in_fence
            continue
        if in_fence:
            continue
        inline = _INLINE_LINK_RE.findall(line)
        links += len(inline)
        links += len(_BARE_URL_RE.findall(_INLINE_LINK_RE.sub("", line)))
        if _CHECKLIST_RE.match(line):
            checklist += 1
        elif _BULLET_RE.match(line):
            bullets += 1
    return BodyStructure(
        length_chars=len(body),
        word_count=len(body.split()),
        checklist_items=checklist,
        fenced_code_blocks=fence_lines // 2,
        links=links,
        bullet_lines=bullets,
    )


def parse_patch(patch: str) -> PatchShape:
    added: list[str] = []
    removed: list[str] = []
    context = 0
    if patch:
        for line in patch.split("\n"):
            if line.startswith("+++") or line.startswith("---"):
                continue
            if line.startswith("@@") or line.startswith("\\"):
                continue
            if line.startswith("+"):
                added.append(line[1:])
            elif line.startswith("-"):
                removed.append(line[1:])
            elif line.startswith(" "):
                context += 1
            # anything else (diff/index headers, bare blank lines) is ignored
    return PatchShape(added_lines=added, removed_lines=removed, context_line_count=context)


# Per-extension lexical profiles. Keyword entries ending in a letter require a
# word boundary after the match; punctuation prefixes (e.g. "//") do not.
_PROFILES: dict[str, dict[str, list[str]]] = {
    "py": {
        "comment": ["#"],
        "import": ["import", "from"],
        "function": ["def", "async def"],
        "type": ["class"],
        "conditional": ["if", "elif", "case", "match"],
        "loop": ["for", "while"],
    },
    "js": {
        "comment": ["//", "/*", "*"],
        "import": ["import", "export", "require("],
        "function": ["function", "async function"],
        "type": ["class", "interface", "enum"],
        "conditional": ["if", "else if", "switch", "case"],
        "loop": ["for", "while", "do"],
    },
    "ts": {
        "comment": ["//", "/*", "*"],
        "import": ["import", "export"],
        "function": ["function", "async function"],
        "type": ["class", "interface", "type", "enum"],
        "conditional": ["if", "else if", "switch", "case"],
        "loop": ["for", "while", "do"],
    },
    "go": {
        "comment": ["//"],
        "import": ["import"],
        "function": ["func"],
        "type": ["type"],
        "conditional": ["if", "else if", "switch", "case"],
        "loop": ["for"],
    },
    "rs": {
        "comment": ["//", "/*"],
        "import": ["use", "extern crate"],
        "function": ["fn", "pub fn", "async fn"],
        "type": ["struct", "enum", "trait", "type", "pub struct", "pub enum"],
        "conditional": ["if", "else if", "match"],
        "loop": ["for", "while", "loop"],
    },
    "java": {
        "comment": ["//", "/*", "*"],
        "import": ["import", "package"],
        "function": ["public", "private", "protected", "static", "void"],
        "type": ["class", "interface", "enum", "public class", "public interface"],
        "conditional": ["if", "else if", "switch", "case"],
        "loop": ["for", "while", "do"],
    },
    "c": {
        "comment": ["//", "/*", "*"],
        "import": ["#include"],
        "function": ["static", "void", "int", "char", "double", "float"],
        "type": ["struct", "enum", "union", "typedef", "class"],
        "conditional": ["if", "else if", "switch", "case"],
        "loop": ["for", "while", "do"],
    },
    "rb": {
        "comment": ["#"],
        "import": ["require", "require_relative"],
        "function": ["def"],
        "type": ["class", "module"],
        "conditional": ["if", "elsif", "unless", "case"],
        "loop": ["for", "while", "until"],
    },
    "sh": {
        "comment": ["#"],
        "import": ["source", ". "],
        "function": ["function"],
        "type": [],
        "conditional": ["if", "elif", "case"],
        "loop": ["for", "while", "until"],
    },
    "yaml": {
        "comment": ["#"],
        "import": [],
        "function": [],
        "type": [],
        "conditional": [],
        "loop": [],
    },
    "md": {
        "comment": ["<!--"],
        "import": [],
        "function": [],
        "type": [],
        "conditional": [],
        "loop": [],
    },
    "generic": {
        "comment": ["//", "#", "/*", "*", "--"],
        "import": ["import", "#include", "use", "require"],
        "function": ["def", "function", "func", "fn"],
        "type": ["class", "struct", "interface", "enum"],
        "conditional": ["if", "elif", "else if", "switch", "case"],
        "loop": ["for", "while", "loop", "until"],
    },
}

_EXTENSION_ALIASES = {
    "py": "py",
    "js": "js", "jsx": "js", "mjs": "js",
    "ts": "ts", "tsx": "ts",
    "go": "go",
    "rs": "rs",
    "java": "java",
    "c": "c", "h": "c", "cpp": "c", "hpp": "c", "cc": "c", "cxx": "c",
    "rb": "rb",
    "sh": "sh", "bash": "sh",
    "yaml": "yaml", "yml": "yaml",
    "md": "md",
}


def profile_for_extension(extension: str) -> dict[str, list[str]]:
    ext = extension.lower().lstrip(".")
    return _PROFILES[_EXTENSION_ALIASES.get(ext, "generic")]


def dump_profiles() -> dict:
    """Profile table + alias map, for the `dump-profiles` CLI export."""
    return {"profiles": _PROFILES, "aliases": _EXTENSION_ALIASES}


def _matches_keyword(stripped: str, keyword: str) -> bool:
    if not stripped.startswith(keyword):
        return False
    if keyword and keyword[-1].isalnum():
        rest = stripped[len(keyword):]
        if rest and (rest[0].isalnum() or rest[0] == "_"):
            return False
    return True


def classify_code_line(line: str, extension: str) -> set[LineTag]:
    stripped = line.strip()
    if not stripped:
        return {LineTag.BLANK}
    prof = profile_for_extension(extension)
    # first non-space token decides comment status exclusively
    if any(stripped.startswith(p) for p in prof["comment"]):
        return {LineTag.COMMENT}
    tags: set[LineTag] = set()
    checks = [
        ("import", LineTag.IMPORT),
        ("function", LineTag.FUNCTION_DECL),
        ("type", LineTag.TYPE_DECL),
        ("conditional", LineTag.CONDITIONAL),
        ("loop", LineTag.LOOP),
    ]
    for key, tag in checks:
        if any(_matches_keyword(stripped, kw) for kw in prof[key]):
            tags.add(tag)
    if not tags:
        tags.add(LineTag.OTHER)
    return tags
