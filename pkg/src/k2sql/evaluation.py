"""Scoring: execution accuracy, efficiency-weighted accuracy, difficulty
breakdowns, and the four-way influence classification between a baseline run
and a knowledge-assisted run."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import Difficulty

logger = logging.getLogger(__name__)

SMALL_SAMPLE_N = 30

INFLUENCE_KEYS = ("assistance", "misleading", "inoperative", "sustainable")


@dataclass(frozen=True)
class InstanceScore:
    instance_id: str
    matched: bool
    time_gold: float | None = None
    time_pred: float | None = None
    difficulty: Difficulty = Difficulty.UNKNOWN


@dataclass(frozen=True)
class DifficultyBucket:
    ex: float
    n: int


@dataclass(frozen=True)
class EvaluationReport:
    ex: float
    n: int
    ves: float | None = None
    per_difficulty: dict[Difficulty, DifficultyBucket] = field(default_factory=dict)
    influence: dict[str, int] | None = None
    excluded: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ex <= 100.0:
            raise ValueError("ex must lie in [0, 100]")
        if self.influence is not None:
            if set(self.influence) != set(INFLUENCE_KEYS):
                raise ValueError("influence must carry exactly the four categories")
            if sum(self.influence.values()) != self.n:
                raise ValueError("influence counts must sum to n")

    def to_json_dict(self) -> dict:
        payload: dict = {
            "ex": self.ex,
            "ves": self.ves,
            "n": self.n,
            "per_difficulty": {
                d.value: {"ex": b.ex, "n": b.n} for d, b in self.per_difficulty.items()
            },
            "excluded": self.excluded,
        }
        if self.influence is not None:
            payload["influence"] = dict(self.influence)
        return payload

    def to_text_table(self) -> str:
        rows: list[tuple[str, str]] = [
            ("EX", f"{self.ex:.2f}"),
            ("VES", "-" if self.ves is None else f"{self.ves:.2f}"),
            ("n", str(self.n)),
        ]
        for difficulty, bucket in self.per_difficulty.items():
            rows.append((f"EX[{difficulty.value}]", f"{bucket.ex:.2f} (n={bucket.n})"))
        if self.influence is not None:
            for key in INFLUENCE_KEYS:
                rows.append((f"influence[{key}]", str(self.influence[key])))
        width = max(len(label) for label, _ in rows)
        return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


def execution_accuracy(scores: Sequence[InstanceScore]) -> float:
    """Percentage of instances whose prediction matched the gold results."""
    if not scores:
        raise ValueError("cannot score an empty list")
    matched = sum(1 for s in scores if s.matched)
    return 100.0 * matched / len(scores)


def valid_efficiency_score(scores: Sequence[InstanceScore]) -> float:
    """Accuracy gated by runtime: each match weighs sqrt(gold time / predicted time).

    Unmatched instances contribute 0.  Matched instances with missing or
    non-positive recorded times are excluded (with a warning) from both the
    sum and the denominator.
    """
    if not scores:
        raise ValueError("cannot score an empty list")
    total = 0.0
    n = 0
    for score in scores:
        if score.matched:
            if (
                score.time_gold is None
                or score.time_pred is None
                or score.time_gold <= 0
                or score.time_pred <= 0
            ):
                logger.warning(
                    "excluding %s from efficiency score: invalid times (%r, %r)",
                    score.instance_id,
                    score.time_gold,
                    score.time_pred,
                )
                continue
            total += math.sqrt(score.time_gold / score.time_pred)
        n += 1
    if n == 0:
        raise ValueError("every instance was excluded for invalid times")
    return 100.0 * total / n


def difficulty_breakdown(scores: Sequence[InstanceScore]) -> dict[Difficulty, DifficultyBucket]:
    """Per-difficulty accuracy; empty buckets never appear."""
    buckets: dict[Difficulty, list[InstanceScore]] = {}
    for score in scores:
        buckets.setdefault(score.difficulty, []).append(score)
    return {
        difficulty: DifficultyBucket(ex=execution_accuracy(members), n=len(members))
        for difficulty, members in buckets.items()
    }


def classify_influence(
    baseline: Mapping[str, bool], assisted: Mapping[str, bool]
) -> dict[str, int]:
    """Partition instances by how knowledge changed per-instance correctness.

    assistance: wrong became right; misleading: right became wrong;
    inoperative: wrong stayed wrong; sustainable: right stayed right.
    """
    if set(baseline) != set(assisted):
        raise ValueError("baseline and assisted cover different instance sets")
    counts = dict.fromkeys(INFLUENCE_KEYS, 0)
    for instance_id, was_matched in baseline.items():
        now_matched = assisted[instance_id]
        if not was_matched and now_matched:
            counts["assistance"] += 1
        elif was_matched and not now_matched:
            counts["misleading"] += 1
        elif not was_matched and not now_matched:
            counts["inoperative"] += 1
        else:
            counts["sustainable"] += 1
    return counts


def build_report(
    scores: Sequence[InstanceScore],
    with_timing: bool = False,
    influence: dict[str, int] | None = None,
    excluded: int = 0,
) -> EvaluationReport:
    if len(scores) < SMALL_SAMPLE_N:
        logger.warning("only %d instances scored; metrics are noisy", len(scores))
    return EvaluationReport(
        ex=execution_accuracy(scores),
        n=len(scores),
        ves=valid_efficiency_score(scores) if with_timing else None,
        per_difficulty=difficulty_breakdown(scores),
        influence=influence,
        excluded=excluded,
    )
