"""Shared fixtures: throwaway SQLite databases and their schema objects."""

import sqlite3
from pathlib import Path

import pytest

from k2sql.model import Column, DatabaseSchema, Table


def build_db(path: Path, statements: list[str]) -> Path:
    conn = sqlite3.connect(path)
    try:
        for statement in statements:
            conn.execute(statement)
        conn.commit()
    finally:
        conn.close()
    return path


def schema_for(db_id: str, path: Path, tables: dict[str, list[str]]) -> DatabaseSchema:
    return DatabaseSchema(
        db_id=db_id,
        tables=tuple(
            Table(name=name, columns=tuple(Column(name=col) for col in cols))
            for name, cols in tables.items()
        ),
        db_file_path=path,
    )


# criterion verdicts collected here and replayed after the test summary so
# they stay visible even when pytest captures stdout
_ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    label = report.nodeid.split(marker, 1)[1]
    number, _, slug = label.partition("_")
    verdict = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE_LINES.append(
        f"[acceptance] criterion {number} ({slug.replace('_', ' ')}): {verdict}"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def people_schema(tmp_path):
    """Three-row people table used across execution tests."""
    path = build_db(
        tmp_path / "people.sqlite",
        [
            "CREATE TABLE people (id INTEGER PRIMARY KEY, name TEXT, age INTEGER, score REAL)",
            "INSERT INTO people VALUES (1, 'ann', 34, 2.5)",
            "INSERT INTO people VALUES (2, 'bob', 19, 4.0)",
            "INSERT INTO people VALUES (3, 'cyd', 27, NULL)",
        ],
    )
    return schema_for("people", path, {"people": ["id", "name", "age", "score"]})
