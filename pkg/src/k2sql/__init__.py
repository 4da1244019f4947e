"""Knowledge-grounded text-to-SQL pipeline: table reading, knowledge
generation, and preference-data collection driven by database execution
feedback."""

__version__ = "0.1.0"

from .contribution import extract_payload, indicator_sql, normalize
from .evaluation import (
    EvaluationReport,
    InstanceScore,
    build_report,
    classify_influence,
    execution_accuracy,
    valid_efficiency_score,
)
from .execution import (
    ExecutionOutcome,
    ExecutionStatus,
    GoldExecutionError,
    ResultSet,
    execute,
    indicator_db,
    result_sets_equal,
    timed_execute,
)
from .model import (
    Column,
    DatabaseSchema,
    Difficulty,
    Instance,
    Knowledge,
    Table,
    decompose_knowledge,
    schema_to_text,
)
from .objectives import DpoRecord, LogprobSequence, dpo_gradient_check, dpo_loss, sft_loss
from .preference import (
    GenerationInput,
    PairSource,
    PreferencePair,
    assemble_dataset,
    collect_db_pairs,
    collect_sql_pairs,
)
from .table_reading import (
    ColumnMatch,
    ColumnMatchSet,
    SimilarityConfig,
    TokenOverlapEmbedder,
    cosine,
    match_columns,
    select_subtables,
    similarity,
)

__all__ = [
    "__version__",
    "Column",
    "ColumnMatch",
    "ColumnMatchSet",
    "DatabaseSchema",
    "Difficulty",
    "DpoRecord",
    "EvaluationReport",
    "ExecutionOutcome",
    "ExecutionStatus",
    "GenerationInput",
    "GoldExecutionError",
    "Instance",
    "InstanceScore",
    "Knowledge",
    "LogprobSequence",
    "PairSource",
    "PreferencePair",
    "ResultSet",
    "SimilarityConfig",
    "Table",
    "TokenOverlapEmbedder",
    "assemble_dataset",
    "build_report",
    "classify_influence",
    "collect_db_pairs",
    "collect_sql_pairs",
    "cosine",
    "decompose_knowledge",
    "dpo_gradient_check",
    "dpo_loss",
    "execute",
    "execution_accuracy",
    "extract_payload",
    "indicator_db",
    "indicator_sql",
    "match_columns",
    "normalize",
    "result_sets_equal",
    "schema_to_text",
    "select_subtables",
    "sft_loss",
    "similarity",
    "timed_execute",
    "valid_efficiency_score",
]
