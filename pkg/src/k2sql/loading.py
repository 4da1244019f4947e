"""Benchmark ingestion: instance files and SQLite schema introspection."""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

from .model import (
    Column,
    DatabaseSchema,
    Difficulty,
    Instance,
    Table,
    decompose_knowledge,
)


class BenchmarkLoadError(Exception):
    pass


def resolve_db_path(schemas_root: Path, db_id: str) -> Path:
    """Database files live at <root>/<db_id>/<db_id>.sqlite or flat in root."""
    nested = schemas_root / db_id / f"{db_id}.sqlite"
    if nested.is_file():
        return nested
    flat = schemas_root / f"{db_id}.sqlite"
    if flat.is_file():
        return flat
    raise BenchmarkLoadError(f"no database file for db_id {db_id!r} under {schemas_root}")


def introspect_schema(db_id: str, db_file_path: Path) -> DatabaseSchema:
    """Read the table/column catalog straight from the database file."""
    try:
        conn = sqlite3.connect(f"file:{db_file_path}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        raise BenchmarkLoadError(f"cannot open database {db_file_path}: {exc}") from exc
    try:
        try:
            names = [
                row[0]
                for row in conn.execute(
                    "SELECT name FROM sqlite_master"
                    " WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
                )
            ]
        except sqlite3.Error as exc:
            raise BenchmarkLoadError(f"cannot read catalog of {db_file_path}: {exc}") from exc
        tables = []
        for name in names:
            info = conn.execute(f'PRAGMA table_info("{name}")').fetchall()
            columns = tuple(Column(name=row[1], declared_type=row[2] or "") for row in info)
            tables.append(Table(name=name, columns=columns))
    finally:
        conn.close()
    if not tables:
        raise BenchmarkLoadError(f"database {db_file_path} contains no tables")
    return DatabaseSchema(db_id=db_id, tables=tuple(tables), db_file_path=db_file_path)


def _parse_record(record: dict, where: str) -> Instance:
    if not isinstance(record, dict):
        raise BenchmarkLoadError(f"{where}: record is not an object")
    raw_id = record.get("id", record.get("question_id"))
    if raw_id is None or str(raw_id) == "":
        raise BenchmarkLoadError(f"{where}: missing id/question_id")
    question = record.get("question")
    gold_sql = record.get("SQL")
    db_id = record.get("db_id")
    for field_name, value in (("question", question), ("SQL", gold_sql), ("db_id", db_id)):
        if not isinstance(value, str) or not value:
            raise BenchmarkLoadError(f"{where}: missing or empty {field_name}")
    evidence = record.get("evidence")
    gold_knowledge = decompose_knowledge(evidence) if isinstance(evidence, str) else None
    try:
        difficulty = Difficulty.parse(record.get("difficulty"))
    except ValueError as exc:
        raise BenchmarkLoadError(f"{where}: {exc}") from exc
    return Instance(
        id=str(raw_id),
        question=question,
        gold_sql=gold_sql,
        db_id=db_id,
        gold_knowledge=gold_knowledge,
        difficulty=difficulty,
    )


def _iter_records(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BenchmarkLoadError(f"cannot read {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            array = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BenchmarkLoadError(f"{path}: invalid JSON array: {exc}") from exc
        for index, record in enumerate(array, start=1):
            yield f"{path}: record {index}", record
        return
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchmarkLoadError(f"{path}: line {line_no}: invalid JSON: {exc}") from exc
        yield f"{path}: line {line_no}", record


def load_benchmark(
    instances_path: Path, schemas_root: Path
) -> tuple[list[Instance], dict[str, DatabaseSchema]]:
    """Load instances in file order plus a schema registry for their db_ids."""
    instances = [_parse_record(record, where) for where, record in _iter_records(instances_path)]
    seen: set[str] = set()
    for instance in instances:
        if instance.id in seen:
            raise BenchmarkLoadError(f"{instances_path}: duplicate instance id {instance.id!r}")
        seen.add(instance.id)
    schemas: dict[str, DatabaseSchema] = {}
    for instance in instances:
        if instance.db_id in schemas:
            continue
        path = resolve_db_path(schemas_root, instance.db_id)
        schemas[instance.db_id] = introspect_schema(instance.db_id, path)
    return instances, schemas


def instance_to_record(instance: Instance) -> dict:
    record: dict = {
        "id": instance.id,
        "question": instance.question,
        "SQL": instance.gold_sql,
        "db_id": instance.db_id,
    }
    if instance.gold_knowledge is not None:
        record["evidence"] = instance.gold_knowledge.text
    if instance.difficulty is not Difficulty.UNKNOWN:
        record["difficulty"] = instance.difficulty.value
    return record


def write_instances(path: Path, instances: list[Instance]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for instance in instances:
            handle.write(json.dumps(instance_to_record(instance)) + "\n")
