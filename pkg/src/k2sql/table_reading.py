"""Question-relevant column selection by thresholded cosine similarity.

A column matches when the similarity between the question and the column's
descriptor string ("<table> <column>" plus description) is strictly above
the threshold alpha.  Matched columns group into per-table sub-tables that
downstream prompts consume.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Protocol

from .model import Column, DatabaseSchema

DEFAULT_ALPHA = 0.6
_TOKEN = re.compile(r"[a-z0-9]+")


class Embedder(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> list[float]: ...


class TokenOverlapEmbedder:
    """Deterministic bag-of-tokens embedder for offline use.

    Lowercased alphanumeric token runs are hashed (sha256, stable across
    processes) into a fixed-length count vector, so cosine similarity equals
    plain token overlap whenever no hash buckets collide.
    """

    name = "token-overlap"

    def __init__(self, dimension: int = 4096) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dimension

    def embed(self, text: str) -> list[float]:
        vector = [0.0] * self.dimension
        for token in _TOKEN.findall(text.lower()):
            vector[self._bucket(token)] += 1.0
        return vector


def cosine(u: list[float], v: list[float]) -> float:
    if len(u) != len(v):
        raise ValueError("vector lengths differ")
    dot = 0.0
    nu = 0.0
    nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # roots first: nu * nv can underflow to zero for tiny magnitudes
    value = dot / (math.sqrt(nu) * math.sqrt(nv))
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class SimilarityConfig:
    alpha: float = DEFAULT_ALPHA
    embedder: Embedder = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.embedder is None:
            object.__setattr__(self, "embedder", TokenOverlapEmbedder())


@dataclass(frozen=True)
class ColumnMatch:
    table: str
    column: str
    score: float


@dataclass(frozen=True)
class ColumnMatchSet:
    entries: tuple[ColumnMatch, ...]

    def __post_init__(self) -> None:
        key = [(-e.score, e.table, e.column) for e in self.entries]
        if key != sorted(key):
            raise ValueError("entries must be sorted by score desc, then table, column")


def column_descriptor(table_name: str, column: Column) -> str:
    parts = [table_name, column.name]
    if column.description:
        parts.append(column.description)
    return " ".join(p for p in parts if p)


def similarity(question: str, column: Column, embedder: Embedder, table_name: str = "") -> float:
    """Cosine similarity between the question and the column descriptor.

    The descriptor is "<table> <column>" plus the description when present;
    pass table_name so the table half is included.
    """
    descriptor = column_descriptor(table_name, column)
    return cosine(embedder.embed(question), embedder.embed(descriptor))


def match_columns(question: str, schema: DatabaseSchema, config: SimilarityConfig) -> ColumnMatchSet:
    """All columns whose similarity is strictly greater than alpha."""
    question_vector = config.embedder.embed(question)
    entries: list[ColumnMatch] = []
    for table in schema.tables:
        for column in table.columns:
            descriptor = column_descriptor(table.name, column)
            score = cosine(question_vector, config.embedder.embed(descriptor))
            if score > config.alpha:
                entries.append(ColumnMatch(table.name, column.name, score))
    entries.sort(key=lambda e: (-e.score, e.table, e.column))
    return ColumnMatchSet(entries=tuple(entries))


def select_subtables(
    matches: ColumnMatchSet,
    schema: DatabaseSchema,
    max_columns: int | None = None,
) -> dict[str, list[str]]:
    """Group matched columns by table, preserving schema column order.

    With max_columns set, only the top-scoring that many entries survive
    before grouping.
    """
    if max_columns is not None and max_columns < 1:
        raise ValueError("max_columns must be positive")
    entries = matches.entries if max_columns is None else matches.entries[:max_columns]
    known = {t.name: {c.name for c in t.columns} for t in schema.tables}
    for entry in entries:
        if entry.table not in known or entry.column not in known[entry.table]:
            raise ValueError(f"match {entry.table}.{entry.column} not in schema {schema.db_id}")
    selected = {(e.table, e.column) for e in entries}
    subtables: dict[str, list[str]] = {}
    for table in schema.tables:
        columns = [c.name for c in table.columns if (table.name, c.name) in selected]
        if columns:
            subtables[table.name] = columns
    return subtables
