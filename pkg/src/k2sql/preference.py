"""Preference-pair collection from the two feedback signals.

The database pass predicts SQL twice per instance (once with generated
knowledge, once with gold) and emits a pair whenever the two executions
disagree.  The contribution pass emits a pair whenever the gold knowledge is
fully used by the reference SQL but the generated knowledge is not.  Both
passes prefer gold knowledge as chosen and generated as rejected.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import gateway
from .contribution import indicator_sql
from .execution import (
    ExecutionOutcome,
    ExecutionStatus,
    execute,
    indicator_db,
)
from .model import DatabaseSchema, Instance, Knowledge, decompose_knowledge, schema_to_text

logger = logging.getLogger(__name__)

SUBTABLE_VALUE_LIMIT = 3


class PairSource(str, Enum):
    DB = "db"
    SQL = "sql"


@dataclass(frozen=True)
class GenerationInput:
    question: str
    schema_text: str
    subtables_text: str


@dataclass(frozen=True)
class PreferencePair:
    input: GenerationInput
    chosen: Knowledge
    rejected: Knowledge
    source: PairSource
    instance_id: str

    def __post_init__(self) -> None:
        if self.chosen.text == self.rejected.text:
            raise ValueError(
                f"instance {self.instance_id}: chosen and rejected texts coincide"
            )


def _render_value(cell) -> str:
    if cell is None:
        return "NULL"
    if isinstance(cell, bytes):
        return "0x" + cell.hex()
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


def render_input(
    instance: Instance,
    subtables: Mapping[str, Sequence[str]],
    schema: DatabaseSchema,
    value_limit: int = SUBTABLE_VALUE_LIMIT,
    timeout: float = 5.0,
) -> GenerationInput:
    """Serialize the prompt inputs: schema text plus sampled subtable values.

    Every selected column contributes up to ``value_limit`` distinct cell
    values in ascending order, fetched read-only; a failing fetch drops the
    values for that column and logs a warning.
    """
    lines = []
    for table in schema.tables:
        if table.name not in subtables:
            continue
        rendered_columns = []
        for column in subtables[table.name]:
            # backtick quoting: an unknown double-quoted identifier would
            # silently come back as a string literal instead of erroring
            sql = (
                f"SELECT DISTINCT `{column}` FROM `{table.name}`"
                f" ORDER BY `{column}` ASC LIMIT {value_limit}"
            )
            outcome = execute(sql, schema, timeout=timeout)
            if outcome.status is ExecutionStatus.OK:
                values = ", ".join(_render_value(row[0]) for row in outcome.result.rows)
                rendered_columns.append(f"{column} [{values}]")
            else:
                logger.warning(
                    "value sampling failed for %s.%s: %s",
                    table.name,
                    column,
                    outcome.error_message,
                )
                rendered_columns.append(column)
        lines.append(f"table {table.name}: " + "; ".join(rendered_columns))
    return GenerationInput(
        question=instance.question,
        schema_text=schema_to_text(schema),
        subtables_text="\n".join(lines),
    )


def _predict_outcome(
    instance: Instance,
    schema: DatabaseSchema,
    knowledge: Knowledge,
    text_to_sql: gateway.Generator,
    config: gateway.GenerationConfig,
    run_query: Callable[[str, DatabaseSchema], ExecutionOutcome],
) -> tuple[str | None, ExecutionOutcome]:
    """SQL prediction driven by one knowledge variant, executed.

    A completion with no recognizable SQL is scored as an unexecutable
    prediction rather than a provider failure.
    """
    try:
        sql = gateway.generate_sql(instance, schema, knowledge, text_to_sql, config)
    except gateway.SqlExtractionError as exc:
        return None, ExecutionOutcome.sql_error(str(exc))
    return sql, run_query(sql, schema)


def collect_db_pairs(
    instances: Sequence[Instance],
    gen_knowledge: Mapping[str, Knowledge],
    gold_knowledge: Mapping[str, Knowledge],
    text_to_sql: gateway.Generator,
    schemas: Mapping[str, DatabaseSchema],
    inputs: Mapping[str, GenerationInput],
    config: gateway.GenerationConfig | None = None,
    run_query: Callable[[str, DatabaseSchema], ExecutionOutcome] | None = None,
    timeout: float = 30.0,
    trace: dict | None = None,
    skipped: list | None = None,
) -> list[PreferencePair]:
    """Database-feedback pass.

    For each instance the text-to-SQL provider predicts once per knowledge
    variant; both predictions execute, and a pair (chosen = gold knowledge,
    rejected = generated) is emitted exactly when the execution indicator
    between them is 0.  Provider failures skip the instance; a failing
    gold-knowledge prediction quarantines it from this pass.
    """
    config = config or gateway.GenerationConfig()
    if run_query is None:
        run_query = lambda sql, schema: execute(sql, schema, timeout=timeout)
    pairs: list[PreferencePair] = []
    for instance in instances:
        if instance.id not in gen_knowledge or instance.id not in gold_knowledge:
            raise ValueError(f"instance {instance.id}: missing a knowledge variant")
        k_gold = gold_knowledge[instance.id]
        k_gen = gen_knowledge[instance.id]
        schema = schemas[instance.db_id]
        try:
            sql_gold, out_gold = _predict_outcome(
                instance, schema, k_gold, text_to_sql, config, run_query
            )
            sql_gen, out_gen = _predict_outcome(
                instance, schema, k_gen, text_to_sql, config, run_query
            )
        except gateway.GenerationError as exc:
            logger.warning("provider failure on %s: %s", instance.id, exc)
            if skipped is not None:
                skipped.append((instance.id, f"provider failure: {exc}"))
            continue
        if out_gold.status is not ExecutionStatus.OK:
            logger.warning(
                "gold-knowledge prediction failed on %s: %s",
                instance.id,
                out_gold.error_message,
            )
            if skipped is not None:
                skipped.append(
                    (instance.id, f"gold-knowledge prediction failed: {out_gold.error_message}")
                )
            continue
        indicator = indicator_db(out_gold, out_gen)
        if trace is not None:
            trace[instance.id] = {
                "sql_gold": sql_gold,
                "sql_gen": sql_gen,
                "status_gold": out_gold.status.value,
                "status_gen": out_gen.status.value,
                "indicator": indicator,
            }
        if indicator == 1:
            continue
        if k_gold.text == k_gen.text:
            logger.warning(
                "instance %s: executions diverged with identical knowledge texts", instance.id
            )
            continue
        pairs.append(
            PreferencePair(
                input=inputs[instance.id],
                chosen=k_gold,
                rejected=k_gen,
                source=PairSource.DB,
                instance_id=instance.id,
            )
        )
    return pairs


def collect_sql_pairs(
    instances: Sequence[Instance],
    gen_knowledge: Mapping[str, Knowledge],
    gold_knowledge: Mapping[str, Knowledge],
    inputs: Mapping[str, GenerationInput],
    trace: dict | None = None,
) -> list[PreferencePair]:
    """Contribution-feedback pass.

    A pair is emitted exactly when the gold knowledge fully contributes to
    the reference SQL and the generated knowledge does not.
    """
    pairs: list[PreferencePair] = []
    for instance in instances:
        if instance.id not in gen_knowledge or instance.id not in gold_knowledge:
            raise ValueError(f"instance {instance.id}: missing a knowledge variant")
        k_gold = gold_knowledge[instance.id]
        k_gen = gen_knowledge[instance.id]
        indicator_gold = indicator_sql(k_gold, instance.gold_sql)
        indicator_gen = indicator_sql(k_gen, instance.gold_sql)
        if trace is not None:
            trace[instance.id] = {
                "indicator_gold": indicator_gold,
                "indicator_gen": indicator_gen,
            }
        if indicator_gold == 1 and indicator_gen == 0 and k_gold.text != k_gen.text:
            pairs.append(
                PreferencePair(
                    input=inputs[instance.id],
                    chosen=k_gold,
                    rejected=k_gen,
                    source=PairSource.SQL,
                    instance_id=instance.id,
                )
            )
    return pairs


def assemble_dataset(
    db_pairs: Sequence[PreferencePair], sql_pairs: Sequence[PreferencePair]
) -> list[PreferencePair]:
    """Union of the two passes with duplicates removed.

    Two pairs are duplicates when (instance_id, chosen text, rejected text)
    coincide; the database-feedback record wins a collision.  Output is
    sorted by instance id, then source.
    """
    merged: dict[tuple[str, str, str], PreferencePair] = {}
    for pair in list(db_pairs) + list(sql_pairs):
        key = (pair.instance_id, pair.chosen.text, pair.rejected.text)
        current = merged.get(key)
        if current is None or (
            current.source is not PairSource.DB and pair.source is PairSource.DB
        ):
            merged[key] = pair
    return sorted(merged.values(), key=lambda p: (p.instance_id, p.source.value))


def export_pairs(path: Path, pairs: Sequence[PreferencePair]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            record = {
                "instance_id": pair.instance_id,
                "source": pair.source.value,
                "input": {
                    "question": pair.input.question,
                    "schema_text": pair.input.schema_text,
                    "subtables_text": pair.input.subtables_text,
                },
                "chosen": pair.chosen.text,
                "rejected": pair.rejected.text,
            }
            handle.write(json.dumps(record) + "\n")


def load_pairs(path: Path) -> list[PreferencePair]:
    pairs: list[PreferencePair] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pairs.append(
                PreferencePair(
                    input=GenerationInput(
                        question=record["input"]["question"],
                        schema_text=record["input"]["schema_text"],
                        subtables_text=record["input"]["subtables_text"],
                    ),
                    chosen=decompose_knowledge(record["chosen"]),
                    rejected=decompose_knowledge(record["rejected"]),
                    source=PairSource(record["source"]),
                    instance_id=record["instance_id"],
                )
            )
    return pairs
