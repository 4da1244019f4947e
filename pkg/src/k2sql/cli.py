"""Pipeline command-line interface.

Commands mirror the pipeline stages: table-read, generate (knowledge or
SQL), collect-feedback, evaluate, and verify-objectives, plus mini-bench to
materialize the bundled offline benchmark.  Every command writes its
artifact atomically together with a manifest of input/output content
digests.  Option values resolve as flags over environment variables over
the config file over built-in defaults.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, evaluation, gateway, minibench, preference
from .cache import CachedGenerator, DiskCache, DEFAULT_CACHE_DIR, content_digest, file_digest
from .contribution import contribution_report
from .execution import (
    DEFAULT_TIMEOUT,
    DEFAULT_TIMING_REPS,
    ExecutionOutcome,
    ExecutionStatus,
    execute,
    indicator_db,
    timed_execute,
)
from .loading import BenchmarkLoadError, load_benchmark
from .model import Instance, Knowledge, decompose_knowledge, schema_to_text
from .objectives import (
    DEFAULT_EPSILON,
    dpo_gradient_check,
    dpo_loss,
    implicit_reward,
    load_dpo_records,
    sft_loss,
)
from .table_reading import (
    DEFAULT_ALPHA,
    SimilarityConfig,
    TokenOverlapEmbedder,
    match_columns,
    select_subtables,
)

logger = logging.getLogger("k2sql")


@dataclass
class Settings:
    """Resolved global options plus the parsed config file tree."""

    file_config: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 4
    verbose: bool = False
    cache_dir: Path = Path(DEFAULT_CACHE_DIR)
    cache_enabled: bool = True

    def value(self, flag, env_key: str | None, file_keys: tuple[str, ...], default, cast=None):
        """flags > env > config file > default."""
        if flag is not None:
            return flag
        if env_key:
            raw = os.environ.get(env_key)
            if raw is not None:
                return cast(raw) if cast else raw
        node = self.file_config
        for key in file_keys[:-1]:
            node = node.get(key, {}) if isinstance(node, dict) else {}
        if isinstance(node, dict) and file_keys and file_keys[-1] in node:
            found = node[file_keys[-1]]
            return cast(found) if cast else found
        return default


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_jsonl(path: Path, records: Sequence[dict]) -> None:
    _atomic_write_text(path, "".join(json.dumps(r) + "\n" for r in records))


def _write_manifest(
    out: Path,
    command: str,
    config: dict,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    seed: int | None,
) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config,
        "inputs": {str(p): file_digest(p) for p in inputs if Path(p).is_file()},
        "outputs": {Path(p).name: file_digest(p) for p in outputs if Path(p).is_file()},
    }
    _atomic_write_text(
        out.parent / (out.name + ".manifest.json"), json.dumps(manifest, indent=2) + "\n"
    )


def _sibling(out: Path, suffix: str) -> Path:
    return out.parent / (out.stem + suffix)


def _map_bounded(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_benchmark_or_fail(data: Path, db_root: Path):
    try:
        return load_benchmark(data, db_root)
    except BenchmarkLoadError as exc:
        raise click.UsageError(str(exc)) from exc


def _build_generator(spec: str, settings: Settings) -> gateway.Generator:
    if spec.startswith("static:"):
        return gateway.StaticGenerator(spec[len("static:") :])
    if spec.startswith("table:"):
        path = Path(spec[len("table:") :])
        if not path.is_file():
            raise click.UsageError(f"stub table {path} does not exist")
        return gateway.MappingGenerator.from_jsonl(path)
    if spec.startswith("replay:"):
        path = Path(spec[len("replay:") :])
        if not path.is_file():
            raise click.UsageError(f"recording {path} does not exist")
        return gateway.ReplayGenerator(path)
    if spec == "remote":
        endpoint = settings.value(None, "K2SQL_ENDPOINT_URL", ("gateway", "endpoint_url"), None)
        model = settings.value(None, "K2SQL_MODEL_NAME", ("gateway", "model_name"), None)
        if not endpoint or not model:
            raise click.UsageError(
                "remote provider needs gateway.endpoint_url and gateway.model_name"
                " (config file or K2SQL_ENDPOINT_URL / K2SQL_MODEL_NAME)"
            )
        return gateway.RemoteGenerator(endpoint, model, api_key=os.environ.get("K2SQL_API_KEY"))
    raise click.UsageError(
        f"unknown provider {spec!r}; expected remote, static:TEXT, table:PATH, or replay:PATH"
    )


def _build_embedder(spec: str, settings: Settings):
    if spec == "token-overlap":
        return TokenOverlapEmbedder()
    if spec == "remote":
        endpoint = settings.value(
            None, "K2SQL_EMBEDDING_URL", ("gateway", "embedding_url"), None
        )
        model = settings.value(
            None, "K2SQL_EMBEDDING_MODEL", ("gateway", "embedding_model"), None
        )
        dimension = settings.value(None, None, ("gateway", "embedding_dimension"), 1536, int)
        if not endpoint or not model:
            raise click.UsageError(
                "remote embedder needs gateway.embedding_url and gateway.embedding_model"
            )
        return gateway.RemoteEmbedder(
            endpoint, model, dimension, api_key=os.environ.get("K2SQL_API_KEY")
        )
    raise click.UsageError(f"unknown embedder {spec!r}; expected token-overlap or remote")


def _wrap_provider(
    generator: gateway.Generator, settings: Settings, record: Path | None
) -> gateway.Generator:
    if record is not None:
        generator = gateway.RecordingGenerator(generator, record)
    if settings.cache_enabled:
        generator = CachedGenerator(generator, DiskCache(settings.cache_dir))
    return generator


def _generation_config(settings: Settings) -> gateway.GenerationConfig:
    return gateway.GenerationConfig(
        temperature=settings.value(None, None, ("generation", "temperature"), 0.6, float),
        top_p=settings.value(None, None, ("generation", "top_p"), 0.9, float),
        max_tokens=settings.value(None, None, ("generation", "max_tokens"), 4096, int),
        seed=settings.seed,
    )


def _load_subtables_artifact(path: Path | None) -> dict[str, dict[str, list[str]]]:
    if path is None:
        return {}
    subtables: dict[str, dict[str, list[str]]] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            subtables[record["instance_id"]] = record.get("subtables", {})
    return subtables


def _load_knowledge_file(path: Path) -> dict[str, Knowledge]:
    knowledge: dict[str, Knowledge] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            instance_id = str(record["instance_id"])
            text = record.get("knowledge")
            if text is None:
                logger.warning(
                    "%s line %d: no knowledge for %s (error record?); using empty text",
                    path,
                    line_no,
                    instance_id,
                )
                text = ""
            knowledge[instance_id] = decompose_knowledge(text)
    return knowledge


def _load_predictions(path: Path) -> dict[str, str | None]:
    predictions: dict[str, str | None] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            predictions[str(record["instance_id"])] = record.get("sql")
    return predictions


def _render_inputs(
    instances: Sequence[Instance],
    schemas: dict,
    subtables_map: dict[str, dict[str, list[str]]],
) -> dict[str, preference.GenerationInput]:
    return {
        instance.id: preference.render_input(
            instance, subtables_map.get(instance.id, {}), schemas[instance.db_id]
        )
        for instance in instances
    }


@click.group()
@click.version_option(version=__version__, prog_name="k2sql")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="TOML config file (default: ./k2sql.toml when present).")
@click.option("--seed", type=int, default=None, help="Random seed recorded in manifests.")
@click.option("--workers", type=int, default=None, help="Bounded parallelism for provider calls.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.option("--no-cache", is_flag=True, help="Bypass the completion cache.")
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None,
              help=f"Cache directory (default {DEFAULT_CACHE_DIR}).")
@click.pass_context
def main(ctx, config_path, seed, workers, verbose, no_cache, cache_dir):
    """Knowledge-grounded text-to-SQL pipeline tools."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    file_config: dict = {}
    if config_path is None and Path("k2sql.toml").is_file():
        config_path = Path("k2sql.toml")
    if config_path is not None:
        try:
            file_config = tomllib.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise click.UsageError(f"cannot read config {config_path}: {exc}") from exc
    settings = Settings(file_config=file_config, verbose=verbose, cache_enabled=not no_cache)
    settings.seed = settings.value(seed, "K2SQL_SEED", ("seed",), None, int)
    settings.workers = settings.value(workers, "K2SQL_WORKERS", ("workers",), 4, int)
    settings.cache_dir = Path(
        settings.value(cache_dir, "K2SQL_CACHE_DIR", ("cache_dir",), DEFAULT_CACHE_DIR)
    )
    ctx.obj = settings


@main.command("table-read")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--db-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--alpha", type=float, default=None, help=f"Similarity threshold (default {DEFAULT_ALPHA}).")
@click.option("--embedder", "embedder_spec", default=None, help="token-overlap or remote.")
@click.option("--max-columns", type=int, default=None, help="Keep only the top-scoring N columns.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def cmd_table_read(settings: Settings, data, db_root, alpha, embedder_spec, max_columns, out):
    """Select question-relevant columns for every instance."""
    alpha = settings.value(alpha, "K2SQL_ALPHA", ("alpha",), DEFAULT_ALPHA, float)
    embedder_spec = settings.value(embedder_spec, None, ("embedder",), "token-overlap")
    embedder = _build_embedder(embedder_spec, settings)
    instances, schemas = _load_benchmark_or_fail(data, db_root)
    config = SimilarityConfig(alpha=alpha, embedder=embedder)

    records = []
    total_matches = 0
    for instance in instances:
        schema = schemas[instance.db_id]
        matches = match_columns(instance.question, schema, config)
        subtables = select_subtables(matches, schema, max_columns)
        total_matches += len(matches.entries)
        records.append(
            {
                "instance_id": instance.id,
                "alpha": alpha,
                "embedder_name": embedder.name,
                "matches": [
                    {"table": m.table, "column": m.column, "score": m.score}
                    for m in matches.entries
                ],
                "subtables": subtables,
            }
        )
    if total_matches == 0:
        click.echo(f"warning: no column matched at alpha={alpha}", err=True)
    _write_jsonl(out, records)
    _write_manifest(
        out,
        "table-read",
        {"alpha": alpha, "embedder": embedder.name, "max_columns": max_columns},
        [data],
        [out],
        settings.seed,
    )
    click.echo(f"wrote {len(records)} records to {out}")


@main.command("generate")
@click.option("--stage", type=click.Choice(["knowledge", "sql"]), required=True)
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--db-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--subtables", type=click.Path(exists=True, path_type=Path), default=None,
              help="table-read artifact feeding the knowledge prompt.")
@click.option("--knowledge", "knowledge_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="knowledge artifact feeding the SQL prompt.")
@click.option("--provider", default="remote", help="remote, static:TEXT, table:PATH, replay:PATH.")
@click.option("--record", type=click.Path(path_type=Path), default=None,
              help="Append request/response pairs to this JSONL file.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def cmd_generate(settings: Settings, stage, data, db_root, subtables, knowledge_path,
                 provider, record, out):
    """Run the knowledge model or the text-to-SQL model over all instances."""
    instances, schemas = _load_benchmark_or_fail(data, db_root)
    generator = _wrap_provider(_build_generator(provider, settings), settings, record)
    config = _generation_config(settings)

    if stage == "knowledge":
        subtables_map = _load_subtables_artifact(subtables)
        inputs = _render_inputs(instances, schemas, subtables_map)

        def run_knowledge(instance: Instance) -> dict:
            generation_input = inputs[instance.id]
            prompt = gateway.knowledge_prompt(
                generation_input.question,
                generation_input.schema_text,
                generation_input.subtables_text,
            )
            base = {
                "instance_id": instance.id,
                "prompt_sha256": content_digest(prompt.encode("utf-8")),
                "provider": generator.name,
            }
            try:
                completion = gateway.strip_fences(generator.complete(prompt, config))
            except gateway.GenerationError as exc:
                logger.warning("provider failure on %s: %s", instance.id, exc)
                return {**base, "knowledge": None, "error": str(exc)}
            if not completion:
                logger.warning("empty completion for %s", instance.id)
            return {**base, "knowledge": completion}

        records = _map_bounded(run_knowledge, instances, settings.workers)
    else:
        knowledge_map = (
            _load_knowledge_file(knowledge_path) if knowledge_path is not None else {}
        )

        def run_sql(instance: Instance) -> dict:
            knowledge = knowledge_map.get(instance.id)
            prompt = gateway.text2sql_prompt(
                instance.question,
                schema_to_text(schemas[instance.db_id]),
                knowledge,
            )
            base = {
                "instance_id": instance.id,
                "prompt_sha256": content_digest(prompt.encode("utf-8")),
                "provider": generator.name,
            }
            try:
                completion = generator.complete(prompt, config)
                sql = gateway.extract_sql(completion)
            except gateway.GenerationError as exc:
                logger.warning("generation failed on %s: %s", instance.id, exc)
                return {**base, "sql": None, "error": str(exc)}
            return {**base, "sql": sql}

        records = _map_bounded(run_sql, instances, settings.workers)

    errors = [r for r in records if r.get("error")]
    _write_jsonl(out, records)
    _write_manifest(
        out,
        f"generate:{stage}",
        {"provider": generator.name, "generation": config.fingerprint()},
        [p for p in (data, subtables, knowledge_path) if p],
        [out],
        settings.seed,
    )
    click.echo(f"wrote {len(records)} records to {out} ({len(errors)} errors)")
    if errors and len(errors) == len(records):
        raise click.ClickException("provider failed on every instance")


@main.command("collect-feedback")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--db-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--gen-knowledge", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--gold-knowledge", type=click.Path(exists=True, path_type=Path), default=None,
              help="Defaults to the instances' own evidence annotations.")
@click.option("--subtables", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--provider", default="remote", help="text-to-SQL provider.")
@click.option("--record", type=click.Path(path_type=Path), default=None)
@click.option("--timeout", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def cmd_collect_feedback(settings: Settings, data, db_root, gen_knowledge, gold_knowledge,
                         subtables, provider, record, timeout, out):
    """Run both feedback passes and export the preference dataset."""
    timeout = settings.value(timeout, None, ("timeout",), DEFAULT_TIMEOUT, float)
    instances, schemas = _load_benchmark_or_fail(data, db_root)
    gen_map = _load_knowledge_file(gen_knowledge)
    if gold_knowledge is not None:
        gold_map = _load_knowledge_file(gold_knowledge)
    else:
        gold_map = {}
        for instance in instances:
            if instance.gold_knowledge is None:
                raise click.UsageError(
                    f"instance {instance.id} has no evidence; pass --gold-knowledge"
                )
            gold_map[instance.id] = instance.gold_knowledge
    missing = [i.id for i in instances if i.id not in gen_map or i.id not in gold_map]
    if missing:
        raise click.UsageError(f"knowledge files do not cover instances: {missing[:5]}")

    generator = _wrap_provider(_build_generator(provider, settings), settings, record)
    config = _generation_config(settings)
    subtables_map = _load_subtables_artifact(subtables)
    inputs = _render_inputs(instances, schemas, subtables_map)

    quarantine: list[dict] = []
    usable: list[Instance] = []
    for instance in instances:
        outcome = execute(instance.gold_sql, schemas[instance.db_id], timeout=timeout)
        if outcome.status is ExecutionStatus.OK:
            usable.append(instance)
        else:
            logger.warning("gold SQL failed on %s: %s", instance.id, outcome.error_message)
            quarantine.append(
                {
                    "instance_id": instance.id,
                    "stage": "gold_sql",
                    "reason": outcome.error_message,
                }
            )

    db_skipped: list[tuple[str, str]] = []
    db_pairs = preference.collect_db_pairs(
        usable,
        gen_map,
        gold_map,
        generator,
        schemas,
        inputs,
        config=config,
        timeout=timeout,
        skipped=db_skipped,
    )
    for instance_id, reason in db_skipped:
        quarantine.append({"instance_id": instance_id, "stage": "db_feedback", "reason": reason})

    sql_pairs = preference.collect_sql_pairs(usable, gen_map, gold_map, inputs)
    dataset = preference.assemble_dataset(db_pairs, sql_pairs)

    pairs_text = []
    for pair in dataset:
        pairs_text.append(
            json.dumps(
                {
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
            )
            + "\n"
        )
    _atomic_write_text(out, "".join(pairs_text))

    quarantine_path = _sibling(out, ".quarantine.jsonl")
    _write_jsonl(quarantine_path, quarantine)

    contributions = []
    for instance in usable:
        contributions.append(
            contribution_report(instance.id, "gold", gold_map[instance.id], instance.gold_sql)
        )
        contributions.append(
            contribution_report(instance.id, "gen", gen_map[instance.id], instance.gold_sql)
        )
    contributions_path = _sibling(out, ".contributions.jsonl")
    _write_jsonl(contributions_path, contributions)

    _write_manifest(
        out,
        "collect-feedback",
        {"provider": generator.name, "timeout": timeout},
        [p for p in (data, gen_knowledge, gold_knowledge, subtables) if p],
        [out, quarantine_path, contributions_path],
        settings.seed,
    )
    click.echo(
        f"collected {len(db_pairs)} db pairs + {len(sql_pairs)} sql pairs"
        f" -> {len(dataset)} after dedup; {len(quarantine)} quarantined"
    )


@main.command("evaluate")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--db-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--pred", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--baseline-pred", type=click.Path(exists=True, path_type=Path), default=None,
              help="Second prediction file enabling influence classification.")
@click.option("--timing-reps", type=int, default=None,
              help=f"Timing repetitions; 0 disables timing and VES (default {DEFAULT_TIMING_REPS}).")
@click.option("--timeout", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def cmd_evaluate(settings: Settings, data, db_root, pred, baseline_pred, timing_reps,
                 timeout, out):
    """Execute gold and predicted SQL and score the run."""
    timeout = settings.value(timeout, None, ("timeout",), DEFAULT_TIMEOUT, float)
    timing_reps = settings.value(
        timing_reps, None, ("timing_reps",), DEFAULT_TIMING_REPS, int
    )
    if timing_reps < 0:
        raise click.UsageError("--timing-reps must be >= 0")
    timing = timing_reps > 0
    instances, schemas = _load_benchmark_or_fail(data, db_root)
    predictions = _load_predictions(pred)
    baseline = _load_predictions(baseline_pred) if baseline_pred is not None else None

    def run(sql: str | None, schema, reason: str) -> ExecutionOutcome:
        if sql is None:
            return ExecutionOutcome.sql_error(reason)
        if timing:
            return timed_execute(sql, schema, repetitions=timing_reps, timeout=timeout)
        return execute(sql, schema, timeout=timeout)

    scores: list[evaluation.InstanceScore] = []
    execution_log: list[dict] = []
    pred_matched: dict[str, bool] = {}
    base_matched: dict[str, bool] = {}
    excluded = 0

    def log_outcome(instance_id: str, variant: str, outcome: ExecutionOutcome) -> None:
        entry = {
            "instance_id": instance_id,
            "variant": variant,
            "status": outcome.status.value,
            "wall_time_s": outcome.wall_time if timing and outcome.status is ExecutionStatus.OK else None,
            "row_count": len(outcome.result.rows) if outcome.result is not None else None,
        }
        if outcome.error_message:
            entry["error_message"] = outcome.error_message
        execution_log.append(entry)

    for instance in instances:
        schema = schemas[instance.db_id]
        gold_outcome = run(instance.gold_sql, schema, "missing gold")
        log_outcome(instance.id, "gold", gold_outcome)
        if gold_outcome.status is not ExecutionStatus.OK:
            logger.warning(
                "gold SQL failed on %s: %s", instance.id, gold_outcome.error_message
            )
            excluded += 1
            continue
        if instance.id not in predictions:
            logger.warning("no prediction for %s", instance.id)
        pred_outcome = run(predictions.get(instance.id), schema, "missing prediction")
        log_outcome(instance.id, "gen", pred_outcome)
        matched = indicator_db(gold_outcome, pred_outcome) == 1
        pred_matched[instance.id] = matched
        scores.append(
            evaluation.InstanceScore(
                instance_id=instance.id,
                matched=matched,
                time_gold=gold_outcome.wall_time if timing and matched else None,
                time_pred=pred_outcome.wall_time if timing and matched else None,
                difficulty=instance.difficulty,
            )
        )
        if baseline is not None:
            base_outcome = run(baseline.get(instance.id), schema, "missing prediction")
            log_outcome(instance.id, "baseline", base_outcome)
            base_matched[instance.id] = indicator_db(gold_outcome, base_outcome) == 1

    if not scores:
        raise click.ClickException("no instance could be scored (all gold SQL failed)")
    influence = (
        evaluation.classify_influence(base_matched, pred_matched)
        if baseline is not None
        else None
    )
    report = evaluation.build_report(
        scores, with_timing=timing, influence=influence, excluded=excluded
    )
    _atomic_write_text(out, json.dumps(report.to_json_dict(), indent=2) + "\n")
    executions_path = _sibling(out, ".executions.jsonl")
    _write_jsonl(executions_path, execution_log)
    _write_manifest(
        out,
        "evaluate",
        {"timing_reps": timing_reps, "timeout": timeout},
        [p for p in (data, pred, baseline_pred) if p],
        [out, executions_path],
        settings.seed,
    )
    click.echo(report.to_text_table())


@main.command("verify-objectives")
@click.option("--records", "records_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--epsilon", type=float, default=None,
              help=f"Finite-difference step (default {DEFAULT_EPSILON}).")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def cmd_verify_objectives(settings: Settings, records_path, epsilon, out):
    """Recompute losses and gradient checks over an exported logprob dump."""
    epsilon = settings.value(epsilon, None, ("epsilon",), DEFAULT_EPSILON, float)
    loaded, errors = load_dpo_records(records_path)
    rows = []
    for entry in loaded:
        record = entry.record
        check = dpo_gradient_check(record, epsilon)
        rows.append(
            {
                "instance_id": entry.instance_id,
                "line": entry.line,
                "beta": record.beta,
                "sft_loss": sft_loss(record.chosen_target),
                "chosen_reward": implicit_reward(record.chosen_target, record.chosen_reference),
                "rejected_reward": implicit_reward(
                    record.rejected_target, record.rejected_reference
                ),
                "dpo_loss": dpo_loss(record),
                "gradient": {
                    "analytic": check.analytic_gradient,
                    "max_abs_deviation": check.max_abs_deviation,
                    "epsilon": check.epsilon,
                    "tokens_checked": check.tokens_checked,
                },
            }
        )
    summary = {
        "n": len(rows),
        "errors": len(errors),
        "mean_dpo_loss": (sum(r["dpo_loss"] for r in rows) / len(rows)) if rows else None,
        "mean_sft_loss": (sum(r["sft_loss"] for r in rows) / len(rows)) if rows else None,
        "max_gradient_deviation": max(
            (r["gradient"]["max_abs_deviation"] for r in rows), default=None
        ),
    }
    payload = {
        "summary": summary,
        "records": rows,
        "errors": [{"line": line, "error": message} for line, message in errors],
    }
    _atomic_write_text(out, json.dumps(payload, indent=2) + "\n")
    _write_manifest(
        out, "verify-objectives", {"epsilon": epsilon}, [records_path], [out], settings.seed
    )
    for line, message in errors:
        click.echo(f"line {line}: {message}", err=True)
    click.echo(
        f"verified {summary['n']} records ({summary['errors']} malformed);"
        f" mean dpo loss {summary['mean_dpo_loss']}"
    )


@main.command("mini-bench")
@click.option("--dest", type=click.Path(path_type=Path), required=True)
def cmd_mini_bench(dest):
    """Materialize the bundled offline mini-benchmark."""
    paths = minibench.materialize(dest)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
