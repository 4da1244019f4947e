"""Core domain types shared across the pipeline.

Everything here is a plain immutable value object: database schemas as read
from SQLite files, benchmark instances, and expert knowledge split into
atomic statements.  No I/O happens in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class Difficulty(str, Enum):
    SIMPLE = "simple"
    MODERATE = "moderate"
    CHALLENGING = "challenging"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, raw: str | None) -> "Difficulty":
        """Map a raw difficulty label to the enum; absent means unknown."""
        if raw is None:
            return cls.UNKNOWN
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise ValueError(f"unrecognized difficulty label: {raw!r}") from None


@dataclass(frozen=True)
class Column:
    name: str
    declared_type: str = ""
    description: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("column name must be non-empty")


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("table name must be non-empty")
        if not self.columns:
            raise ValueError(f"table {self.name!r} has no columns")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name!r} has duplicate column names")


@dataclass(frozen=True)
class DatabaseSchema:
    db_id: str
    tables: tuple[Table, ...]
    db_file_path: Path

    def __post_init__(self) -> None:
        if not self.db_id:
            raise ValueError("db_id must be non-empty")
        if not self.tables:
            raise ValueError(f"schema {self.db_id!r} has no tables")
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ValueError(f"schema {self.db_id!r} has duplicate table names")

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(f"no table {name!r} in schema {self.db_id!r}")


@dataclass(frozen=True)
class Knowledge:
    """A piece of expert knowledge plus its decomposition into atomic statements.

    Build instances through :func:`decompose_knowledge` so that
    ``sub_knowledge`` is always the canonical split of ``text``.
    """

    text: str
    sub_knowledge: tuple[str, ...] = field(default=())

    @property
    def is_empty(self) -> bool:
        return not self.sub_knowledge


@dataclass(frozen=True)
class Instance:
    id: str
    question: str
    gold_sql: str
    db_id: str
    gold_knowledge: Knowledge | None = None
    difficulty: Difficulty = Difficulty.UNKNOWN

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("instance id must be non-empty")
        if not self.question:
            raise ValueError(f"instance {self.id!r}: question must be non-empty")
        if not self.gold_sql:
            raise ValueError(f"instance {self.id!r}: gold SQL must be non-empty")
        if not self.db_id:
            raise ValueError(f"instance {self.id!r}: db_id must be non-empty")


def schema_to_text(schema: DatabaseSchema) -> str:
    """Render a schema as one ``table name(col, col)`` line per table."""
    lines = []
    for t in schema.tables:
        cols = ", ".join(c.name for c in t.columns)
        lines.append(f"table {t.name}({cols})")
    return "\n".join(lines)


_TERMINATORS = frozenset(".!?;")
_TRIM_TERMINATORS = ".!?;"
_SPLIT_MARKERS = ("refer", "=")


def _quoted_mask(text: str) -> list[bool]:
    """Mark every character that sits inside a quoted region.

    Quote styles: single quotes (with '' escaping), double quotes, backticks,
    and square brackets.  An opener with no closer is left unquoted so that
    malformed text still decomposes deterministically.
    """
    mask = [False] * len(text)
    closers = {"'": "'", '"': '"', "`": "`", "[": "]"}
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        closer = closers.get(ch)
        if closer is None:
            i += 1
            continue
        j = i + 1
        end = -1
        while j < n:
            if text[j] == closer:
                if ch == "'" and j + 1 < n and text[j + 1] == "'":
                    j += 2
                    continue
                end = j
                break
            j += 1
        if end == -1:
            i += 1
            continue
        for k in range(i, end + 1):
            mask[k] = True
        i = end + 1
    return mask


def _split_sentences(text: str) -> list[str]:
    """Split on top-level sentence terminators.

    A period counts only when followed by whitespace or end of text, so
    decimals ("3.5") and qualified names ("s.name") survive.
    """
    mask = _quoted_mask(text)
    parts: list[str] = []
    start = 0
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS or mask[i]:
            continue
        if ch == "." and i + 1 < len(text) and not text[i + 1].isspace():
            continue
        parts.append(text[start:i])
        start = i + 1
    parts.append(text[start:])
    return parts


def _has_marker(segment: str) -> bool:
    low = segment.lower()
    return any(m in low for m in _SPLIT_MARKERS)


def _split_clauses(sentence: str) -> list[str]:
    """Split a sentence at top-level commas joining two self-contained statements.

    A comma qualifies only when the text on both sides carries its own
    definition marker; plain enumerations stay together.
    """
    mask = _quoted_mask(sentence)
    parts: list[str] = []
    start = 0
    i = 0
    n = len(sentence)
    while i < n - 1:
        if sentence[i] == "," and sentence[i + 1] == " " and not mask[i]:
            left = sentence[start:i]
            right = sentence[i + 2 :]
            if _has_marker(left) and _has_marker(right):
                parts.append(left)
                start = i + 2
                i += 2
                continue
        i += 1
    parts.append(sentence[start:])
    return parts


def decompose_knowledge(text: str) -> Knowledge:
    """Split raw knowledge text into atomic statements.

    Sentences are cut at top-level ``.``, ``!``, ``?``, and ``;`` (quoted
    regions and decimal points are immune), then each sentence is further cut
    at commas that join two independent definitions.  Fragments are trimmed
    and empty ones dropped; running the split again on any fragment yields
    that fragment unchanged.
    """
    fragments: list[str] = []
    for sentence in _split_sentences(text):
        for clause in _split_clauses(sentence):
            # trailing terminators would re-split on a second pass
            clause = clause.strip().rstrip(_TRIM_TERMINATORS).strip()
            if clause:
                fragments.append(clause)
    return Knowledge(text=text, sub_knowledge=tuple(fragments))
