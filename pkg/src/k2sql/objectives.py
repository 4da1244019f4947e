"""Numeric verification of the training objectives over exported logprobs.

Works on token-level log-probability dumps produced by an external trainer:
supervised cross-entropy, implicit sequence rewards (target minus reference
log-likelihood), the preference loss -log sigmoid(beta * reward gap), and a
finite-difference gradient check of that loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

DEFAULT_BETA = 0.1
DEFAULT_EPSILON = 1e-5
_LOGPROB_SLACK = 1e-6


@dataclass(frozen=True)
class LogprobSequence:
    token_ids: tuple[int, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "token_ids", tuple(self.token_ids))
        object.__setattr__(self, "logprobs", tuple(float(x) for x in self.logprobs))
        if len(self.token_ids) != len(self.logprobs):
            raise ValueError("token_ids and logprobs lengths differ")
        for lp in self.logprobs:
            if not math.isfinite(lp) or lp > _LOGPROB_SLACK:
                raise ValueError(f"logprob {lp!r} is not a finite value <= 0")


@dataclass(frozen=True)
class DpoRecord:
    chosen_target: LogprobSequence
    chosen_reference: LogprobSequence
    rejected_target: LogprobSequence
    rejected_reference: LogprobSequence
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        # beta 0 is admitted so the constant-loss degenerate case stays checkable
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ValueError("beta must be a finite value >= 0")
        if self.chosen_target.token_ids != self.chosen_reference.token_ids:
            raise ValueError("chosen target/reference token_ids differ")
        if self.rejected_target.token_ids != self.rejected_reference.token_ids:
            raise ValueError("rejected target/reference token_ids differ")


def sft_loss(gold_token_logprobs: LogprobSequence, reduce: str = "sum") -> float:
    """Negative sum of gold-token logprobs; "mean" divides by length."""
    if not gold_token_logprobs.logprobs:
        raise ValueError("sequence must be non-empty")
    if reduce not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduce!r}")
    total = -math.fsum(gold_token_logprobs.logprobs)
    if reduce == "mean":
        total /= len(gold_token_logprobs.logprobs)
    return max(0.0, total)


def implicit_reward(target: LogprobSequence, reference: LogprobSequence) -> float:
    """Sequence reward: target log-likelihood minus reference log-likelihood."""
    if target.token_ids != reference.token_ids:
        raise ValueError("target and reference token_ids differ")
    return math.fsum(target.logprobs) - math.fsum(reference.logprobs)


def _softplus(z: float) -> float:
    # max(z, 0) + log1p(exp(-|z|)) never overflows
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _reward_gap(record: DpoRecord) -> float:
    chosen = implicit_reward(record.chosen_target, record.chosen_reference)
    rejected = implicit_reward(record.rejected_target, record.rejected_reference)
    return record.beta * (chosen - rejected)


def dpo_loss(record: DpoRecord) -> float:
    """Preference loss -log sigmoid(beta * (chosen reward - rejected reward)).

    Evaluated as softplus of the negated gap, which stays finite for gaps
    up to about 1e4 in magnitude.
    """
    return _softplus(-_reward_gap(record))


@dataclass(frozen=True)
class GradientCheckReport:
    analytic_gradient: float
    max_abs_deviation: float
    epsilon: float
    tokens_checked: int


def _nudged(sequence: LogprobSequence, index: int, delta: float) -> LogprobSequence:
    # bypasses validation: a +delta nudge may push a zero logprob past the cap
    nudged = object.__new__(LogprobSequence)
    logprobs = list(sequence.logprobs)
    logprobs[index] += delta
    object.__setattr__(nudged, "token_ids", sequence.token_ids)
    object.__setattr__(nudged, "logprobs", tuple(logprobs))
    return nudged


def _with_chosen_target(record: DpoRecord, sequence: LogprobSequence) -> DpoRecord:
    shifted = object.__new__(DpoRecord)
    object.__setattr__(shifted, "chosen_target", sequence)
    object.__setattr__(shifted, "chosen_reference", record.chosen_reference)
    object.__setattr__(shifted, "rejected_target", record.rejected_target)
    object.__setattr__(shifted, "rejected_reference", record.rejected_reference)
    object.__setattr__(shifted, "beta", record.beta)
    return shifted


def dpo_gradient_check(record: DpoRecord, epsilon: float = DEFAULT_EPSILON) -> GradientCheckReport:
    """Central finite differences vs the analytic chosen-target gradient.

    The loss depends on each chosen-target logprob only through the sequence
    sum, so the analytic partial derivative is -beta * sigmoid(-gap) at
    every position.
    """
    if not 1e-8 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-8, 1e-3]")
    gap = _reward_gap(record)
    analytic = -record.beta * _sigmoid(-gap)
    max_deviation = 0.0
    for index in range(len(record.chosen_target.logprobs)):
        plus = dpo_loss(
            _with_chosen_target(record, _nudged(record.chosen_target, index, epsilon))
        )
        minus = dpo_loss(
            _with_chosen_target(record, _nudged(record.chosen_target, index, -epsilon))
        )
        finite_difference = (plus - minus) / (2.0 * epsilon)
        max_deviation = max(max_deviation, abs(finite_difference - analytic))
    return GradientCheckReport(
        analytic_gradient=analytic,
        max_abs_deviation=max_deviation,
        epsilon=epsilon,
        tokens_checked=len(record.chosen_target.logprobs),
    )


@dataclass(frozen=True)
class LoadedRecord:
    line: int
    instance_id: str
    record: DpoRecord


def _sequence_pair(payload: dict) -> tuple[LogprobSequence, LogprobSequence]:
    tokens = payload["tokens"]
    target = LogprobSequence(tokens, payload["target_logprobs"])
    reference = LogprobSequence(tokens, payload["reference_logprobs"])
    return target, reference


def load_dpo_records(path: Path) -> tuple[list[LoadedRecord], list[tuple[int, str]]]:
    """Parse a logprob JSONL dump; malformed lines land in the error list."""
    records: list[LoadedRecord] = []
    errors: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                chosen_target, chosen_reference = _sequence_pair(payload["chosen"])
                rejected_target, rejected_reference = _sequence_pair(payload["rejected"])
                record = DpoRecord(
                    chosen_target=chosen_target,
                    chosen_reference=chosen_reference,
                    rejected_target=rejected_target,
                    rejected_reference=rejected_reference,
                    beta=float(payload.get("beta", DEFAULT_BETA)),
                )
                records.append(
                    LoadedRecord(line_no, str(payload.get("instance_id", line_no)), record)
                )
            except (KeyError, TypeError, ValueError) as exc:
                errors.append((line_no, f"{type(exc).__name__}: {exc}"))
    return records, errors


def dump_dpo_records(path: Path, entries: Iterable[tuple[str, DpoRecord]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for instance_id, record in entries:
            payload = {
                "instance_id": instance_id,
                "beta": record.beta,
                "chosen": {
                    "tokens": list(record.chosen_target.token_ids),
                    "target_logprobs": list(record.chosen_target.logprobs),
                    "reference_logprobs": list(record.chosen_reference.logprobs),
                },
                "rejected": {
                    "tokens": list(record.rejected_target.token_ids),
                    "target_logprobs": list(record.rejected_target.logprobs),
                    "reference_logprobs": list(record.rejected_reference.logprobs),
                },
            }
            handle.write(json.dumps(payload) + "\n")
