"""Provider abstraction for text generation and embeddings.

One interface covers the knowledge generator and the text-to-SQL model:
``complete(prompt, config) -> text``.  Deterministic stub providers make the
whole pipeline runnable offline; the remote provider speaks the common
chat-completion JSON shape and can record sessions for later replay.
"""

from __future__ import annotations

import json
import random
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .model import DatabaseSchema, Instance, Knowledge, decompose_knowledge, schema_to_text

DEFAULT_TEMPERATURE = 0.6
DEFAULT_TOP_P = 0.9
DEFAULT_MAX_TOKENS = 4096
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BASE_BACKOFF = 0.5


class GenerationError(Exception):
    pass


class TransientProviderError(GenerationError):
    """Timeouts, rate limits, and server-side failures worth retrying."""


class RetryExhaustedError(GenerationError):
    def __init__(self, attempts: list[Exception]):
        super().__init__(
            f"gave up after {len(attempts)} attempts; last error: {attempts[-1]}"
        )
        self.attempts = attempts


class SqlExtractionError(GenerationError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def fingerprint(self) -> str:
        return f"t={self.temperature}|p={self.top_p}|m={self.max_tokens}|s={self.seed}"


class Generator(Protocol):
    name: str

    def complete(self, prompt: str, config: GenerationConfig) -> str: ...


class StaticGenerator:
    """Always returns the same completion; the smallest possible stub."""

    def __init__(self, text: str, name: str = "static"):
        self.text = text
        self.name = name

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        return self.text


class MappingGenerator:
    """Substring-triggered stub: first rule whose match occurs in the prompt wins.

    Rule order is significant, so put the most specific triggers first.
    """

    def __init__(
        self,
        rules: Sequence[tuple[str, str]],
        default: str | None = None,
        name: str = "table",
    ):
        self.rules = list(rules)
        self.default = default
        self.name = name
        for match, _ in self.rules:
            if not match:
                raise ValueError("empty match string would trigger on every prompt")

    @classmethod
    def from_jsonl(cls, path: Path, name: str | None = None) -> "MappingGenerator":
        rules: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                rules.append((record["match"], record["completion"]))
        return cls(rules, name=name or f"table:{path.name}")

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        for match, completion in self.rules:
            if match in prompt:
                return completion
        if self.default is not None:
            return self.default
        raise GenerationError(f"no stub rule matched a prompt of {len(prompt)} chars")


class RecordingGenerator:
    """Wraps a provider and appends request/response pairs to a JSONL file."""

    def __init__(self, inner: Generator, path: Path):
        self.inner = inner
        self.path = Path(path)
        self.name = inner.name

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        completion = self.inner.complete(prompt, config)
        entry = {
            "request": {"prompt": prompt, "config": config.fingerprint()},
            "response": {"completion": completion},
        }
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry) + "\n")
        return completion


class ReplayGenerator:
    """Replays a recorded session by exact prompt lookup; no network."""

    def __init__(self, path: Path, name: str | None = None):
        self.name = name or f"replay:{Path(path).name}"
        self._responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self._responses[entry["request"]["prompt"]] = entry["response"]["completion"]

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        try:
            return self._responses[prompt]
        except KeyError:
            raise GenerationError("prompt not found in recorded session") from None


def call_with_retry(
    request: Callable[[], object],
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    base_backoff: float = DEFAULT_BASE_BACKOFF,
    rng: random.Random | None = None,
    sleep: Callable[[float], None] = time.sleep,
):
    """Retry transient failures with exponential backoff and jitter.

    Non-transient errors propagate immediately; exhausting the budget raises
    RetryExhaustedError carrying the attempt trace.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    rng = rng or random.Random()
    failures: list[Exception] = []
    for attempt in range(1, max_attempts + 1):
        try:
            return request()
        except TransientProviderError as exc:
            failures.append(exc)
            if attempt == max_attempts:
                raise RetryExhaustedError(failures) from exc
            delay = base_backoff * (2 ** (attempt - 1)) * (0.5 + rng.random())
            sleep(delay)
    raise AssertionError("unreachable")


class RemoteGenerator:
    """Chat-completion HTTP provider; endpoint and key come from config/env."""

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        api_key: str | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        base_backoff: float = DEFAULT_BASE_BACKOFF,
        client: httpx.Client | None = None,
        rng: random.Random | None = None,
    ):
        if not endpoint_url or not model_name:
            raise ValueError("endpoint_url and model_name are required")
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.name = f"remote:{model_name}"
        self.max_attempts = max_attempts
        self.base_backoff = base_backoff
        self._rng = rng
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=60.0, headers=headers)

    def _post(self, payload: dict) -> dict:
        try:
            response = self._client.post(self.endpoint_url, json=payload)
        except httpx.TransportError as exc:
            raise TransientProviderError(f"transport failure: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise GenerationError(f"HTTP {response.status_code}: {response.text[:200]}")
        return response.json()

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
        }
        if config.seed is not None:
            payload["seed"] = config.seed
        data = call_with_retry(
            lambda: self._post(payload),
            max_attempts=self.max_attempts,
            base_backoff=self.base_backoff,
            rng=self._rng,
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GenerationError(f"malformed completion response: {exc}") from exc


class RemoteEmbedder:
    """Embedding HTTP provider with a per-instance memo for determinism."""

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        dimension: int,
        api_key: str | None = None,
        client: httpx.Client | None = None,
    ):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.dimension = dimension
        self.name = f"remote:{model_name}"
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=60.0, headers=headers)
        self._memo: dict[str, list[float]] = {}

    def embed(self, text: str) -> list[float]:
        if text in self._memo:
            return self._memo[text]
        try:
            response = self._client.post(
                self.endpoint_url, json={"model": self.model_name, "input": text}
            )
            response.raise_for_status()
            vector = [float(x) for x in response.json()["data"][0]["embedding"]]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise GenerationError(f"embedding request failed: {exc}") from exc
        if len(vector) != self.dimension:
            raise GenerationError(
                f"embedding length {len(vector)} != declared dimension {self.dimension}"
            )
        self._memo[text] = vector
        return vector


def load_template(name: str) -> str:
    return resources.files("k2sql").joinpath(f"prompts/{name}").read_text(encoding="utf-8")


_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


def render_template(template: str, values: Mapping[str, str]) -> str:
    """Fill {{name}} placeholders; unknown placeholders are an error."""

    def _sub(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise ValueError(f"template placeholder {{{{{key}}}}} has no value")
        return values[key]

    return _PLACEHOLDER.sub(_sub, template)


def strip_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        lines = stripped.splitlines()
        lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        stripped = "\n".join(lines).strip()
    return stripped


def knowledge_prompt(question: str, schema_text: str, subtables_text: str) -> str:
    return render_template(
        load_template("knowledge.txt"),
        {"question": question, "schema": schema_text, "subtables": subtables_text},
    )


def text2sql_prompt(question: str, schema_text: str, knowledge: Knowledge | None) -> str:
    section = ""
    if knowledge is not None and knowledge.text.strip():
        section = f"Knowledge: {knowledge.text.strip()}\n\n"
    return render_template(
        load_template("text2sql.txt"),
        {"question": question, "schema": schema_text, "knowledge": section},
    )


def generate_knowledge(
    generation_input, generator: Generator, config: GenerationConfig
) -> Knowledge:
    """Prompt the knowledge model and decompose its answer.

    ``generation_input`` is any object with question, schema_text, and
    subtables_text attributes (see the preference module).
    """
    prompt = knowledge_prompt(
        generation_input.question,
        generation_input.schema_text,
        generation_input.subtables_text,
    )
    completion = strip_fences(generator.complete(prompt, config))
    return decompose_knowledge(completion)


_SQL_KEYWORD_LINE = re.compile(r"^\s*(select|with|values)\b", re.IGNORECASE)
_FENCED_BLOCK = re.compile(r"```(?:sql)?\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)


def extract_sql(completion: str) -> str:
    """First fenced block if any, else the first line starting with a SQL keyword."""
    fenced = _FENCED_BLOCK.search(completion)
    if fenced:
        statement = fenced.group(1).strip()
        if statement:
            return statement.rstrip(";").strip()
    for line in completion.splitlines():
        if _SQL_KEYWORD_LINE.match(line):
            return line.strip().rstrip(";").strip()
    raise SqlExtractionError(f"no SQL statement found in completion: {completion[:120]!r}")


def generate_sql(
    instance: Instance,
    schema: DatabaseSchema,
    knowledge: Knowledge | None,
    generator: Generator,
    config: GenerationConfig,
) -> str:
    """Prompt the text-to-SQL model; knowledge section appears only when given."""
    prompt = text2sql_prompt(instance.question, schema_to_text(schema), knowledge)
    completion = generator.complete(prompt, config)
    return extract_sql(completion)
