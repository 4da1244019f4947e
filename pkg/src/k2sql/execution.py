"""Read-only SQL execution with timeouts, plus result-set equivalence.

Queries run against SQLite files opened in read-only mode with query_only
set, so the database can never be modified.  Timeouts are enforced by a
timer thread that interrupts the connection.  Result sets compare as
multisets of rows: row order is ignored, column order matters, and cell
values follow the tagged equality rules documented on ``result_sets_equal``.
"""

from __future__ import annotations

import math
import sqlite3
import statistics
import threading
from dataclasses import dataclass, replace
from enum import Enum
from time import perf_counter
from typing import Union

from .model import DatabaseSchema

Cell = Union[None, int, float, str, bytes]
Row = tuple[Cell, ...]

FLOAT_RTOL = 1e-6
DEFAULT_TIMEOUT = 30.0
DEFAULT_TIMING_REPS = 5


class ExecutionStatus(str, Enum):
    OK = "ok"
    SQL_ERROR = "sql_error"
    TIMEOUT = "timeout"


class GoldExecutionError(Exception):
    """The reference SQL itself failed to execute; the instance is unusable."""


@dataclass(frozen=True)
class ResultSet:
    column_count: int
    rows: tuple[Row, ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != self.column_count:
                raise ValueError(
                    f"row arity {len(row)} != column_count {self.column_count}"
                )


@dataclass(frozen=True)
class ExecutionOutcome:
    status: ExecutionStatus
    result: ResultSet | None = None
    error_message: str | None = None
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        if self.status is ExecutionStatus.OK:
            if self.result is None or self.error_message is not None:
                raise ValueError("ok outcome carries a result and no error")
        else:
            if self.error_message is None or self.result is not None:
                raise ValueError("failed outcome carries an error and no result")
        if self.wall_time < 0:
            raise ValueError("wall_time must be >= 0")

    @classmethod
    def ok(cls, result: ResultSet, wall_time: float) -> "ExecutionOutcome":
        return cls(ExecutionStatus.OK, result=result, wall_time=wall_time)

    @classmethod
    def sql_error(cls, message: str) -> "ExecutionOutcome":
        return cls(ExecutionStatus.SQL_ERROR, error_message=message or "sql error")

    @classmethod
    def timed_out(cls, message: str) -> "ExecutionOutcome":
        return cls(ExecutionStatus.TIMEOUT, error_message=message)


def execute(sql: str, schema: DatabaseSchema, timeout: float = DEFAULT_TIMEOUT) -> ExecutionOutcome:
    """Run a single read statement against the schema's database file.

    Returns ok with the fully materialized result set and wall time, or
    sql_error / timeout.  No exception escapes; write statements fail with
    sql_error because the connection is read-only.
    """
    if timeout <= 0:
        raise ValueError("timeout must be > 0")
    start = perf_counter()
    try:
        conn = sqlite3.connect(
            f"file:{schema.db_file_path}?mode=ro", uri=True, check_same_thread=False
        )
    except sqlite3.Error as exc:
        return ExecutionOutcome.sql_error(f"cannot open database: {exc}")

    interrupted = threading.Event()

    def _interrupt() -> None:
        interrupted.set()
        conn.interrupt()

    timer = threading.Timer(timeout, _interrupt)
    timer.daemon = True
    timer.start()
    try:
        conn.execute("PRAGMA query_only = 1")
        cursor = conn.execute(sql)
        raw = cursor.fetchall()
        wall = perf_counter() - start
        if interrupted.is_set():
            return ExecutionOutcome.timed_out(f"query exceeded {timeout}s")
        column_count = len(cursor.description) if cursor.description else 0
        rows = tuple(tuple(row) for row in raw)
        return ExecutionOutcome.ok(ResultSet(column_count, rows), wall)
    except (sqlite3.Error, sqlite3.Warning) as exc:
        if interrupted.is_set():
            return ExecutionOutcome.timed_out(f"query exceeded {timeout}s")
        return ExecutionOutcome.sql_error(f"{type(exc).__name__}: {exc}")
    finally:
        timer.cancel()
        conn.close()


def timed_execute(
    sql: str,
    schema: DatabaseSchema,
    repetitions: int = DEFAULT_TIMING_REPS,
    timeout: float = DEFAULT_TIMEOUT,
) -> ExecutionOutcome:
    """Execute with one untimed warm-up, then report the median wall time.

    The result set comes from the final run; any failing run is returned
    as-is.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    warmup = execute(sql, schema, timeout)
    if warmup.status is not ExecutionStatus.OK:
        return warmup
    times: list[float] = []
    last = warmup
    for _ in range(repetitions):
        outcome = execute(sql, schema, timeout)
        if outcome.status is not ExecutionStatus.OK:
            return outcome
        times.append(outcome.wall_time)
        last = outcome
    return replace(last, wall_time=statistics.median(times))


def _cell_equal(a: Cell, b: Cell) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bytes) or isinstance(b, bytes):
        return isinstance(a, bytes) and isinstance(b, bytes) and a == b
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) and a == b
    if isinstance(a, float) and isinstance(b, float):
        if a == b:
            return True
        if math.isnan(a) and math.isnan(b):
            return True
        if math.isnan(a) or math.isnan(b) or math.isinf(a) or math.isinf(b):
            return False
        return abs(a - b) <= FLOAT_RTOL * max(1.0, abs(a), abs(b))
    # remaining combinations are int/int or int/float: exact numeric equality
    return a == b


def _cell_sort_key(cell: Cell) -> tuple:
    if cell is None:
        return (0, 0, 0.0)
    if isinstance(cell, bool) or isinstance(cell, (int, float)):
        if isinstance(cell, float) and math.isnan(cell):
            return (1, 1, 0.0)
        return (1, 0, float(cell))
    if isinstance(cell, str):
        return (2, 0, cell)
    return (3, 0, cell)


def _row_sort_key(row: Row) -> tuple:
    return tuple(_cell_sort_key(c) for c in row)


def _rows_equal(a: Row, b: Row) -> bool:
    return len(a) == len(b) and all(_cell_equal(x, y) for x, y in zip(a, b))


def result_sets_equal(a: ResultSet, b: ResultSet) -> bool:
    """Multiset equality over rows; column order significant, row order not.

    Column arity enters only through the rows, so two empty results are
    equal whatever their declared widths.  Cell rules: Null matches only
    Null; integers and floats compare by exact numeric value across tags;
    float-float comparison tolerates relative error 1e-6; NaN matches NaN;
    text and blob compare exactly and never match other tags.
    """
    if len(a.rows) != len(b.rows):
        return False
    left = sorted(a.rows, key=_row_sort_key)
    right = sorted(b.rows, key=_row_sort_key)
    return all(_rows_equal(x, y) for x, y in zip(left, right))


def indicator_db(v_gold: ExecutionOutcome, v_gen: ExecutionOutcome) -> int:
    """Execution-feedback indicator: 1 iff both succeeded with equal results.

    A failed gold outcome marks a broken reference and raises; a failed
    generated outcome simply scores 0.
    """
    if v_gold.status is not ExecutionStatus.OK:
        raise GoldExecutionError(
            f"gold execution failed ({v_gold.status.value}): {v_gold.error_message}"
        )
    if v_gen.status is not ExecutionStatus.OK:
        return 0
    assert v_gold.result is not None and v_gen.result is not None
    return 1 if result_sets_equal(v_gold.result, v_gen.result) else 0
