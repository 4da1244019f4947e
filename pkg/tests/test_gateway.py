"""Provider stubs, retry policy, prompt templates, and SQL extraction."""

import json
import random

import httpx
import pytest

from k2sql.gateway import (
    GenerationConfig,
    GenerationError,
    MappingGenerator,
    RecordingGenerator,
    RemoteEmbedder,
    RemoteGenerator,
    ReplayGenerator,
    RetryExhaustedError,
    SqlExtractionError,
    StaticGenerator,
    TransientProviderError,
    call_with_retry,
    extract_sql,
    generate_knowledge,
    knowledge_prompt,
    render_template,
    strip_fences,
    text2sql_prompt,
)
from k2sql.model import decompose_knowledge

CFG = GenerationConfig()


class TestStubs:
    def test_static(self):
        assert StaticGenerator("hello").complete("anything", CFG) == "hello"

    def test_mapping_first_rule_wins(self):
        gen = MappingGenerator([("alpha", "one"), ("alp", "two")])
        assert gen.complete("the alpha prompt", CFG) == "one"

    def test_mapping_order_matters(self):
        gen = MappingGenerator([("alp", "two"), ("alpha", "one")])
        assert gen.complete("the alpha prompt", CFG) == "two"

    def test_mapping_default_and_miss(self):
        with_default = MappingGenerator([("x", "y")], default="fallback")
        assert with_default.complete("nothing here", CFG) == "fallback"
        without = MappingGenerator([("x", "y")])
        with pytest.raises(GenerationError):
            without.complete("nothing here", CFG)

    def test_mapping_rejects_empty_match(self):
        with pytest.raises(ValueError):
            MappingGenerator([("", "y")])

    def test_mapping_from_jsonl(self, tmp_path):
        path = tmp_path / "rules.jsonl"
        path.write_text(
            json.dumps({"match": "ping", "completion": "pong"}) + "\n"
        )
        gen = MappingGenerator.from_jsonl(path)
        assert gen.complete("ping goes here", CFG) == "pong"

    def test_record_then_replay(self, tmp_path):
        log = tmp_path / "session.jsonl"
        recorded = RecordingGenerator(StaticGenerator("answer"), log)
        assert recorded.complete("prompt one", CFG) == "answer"
        assert recorded.complete("prompt two", CFG) == "answer"

        replay = ReplayGenerator(log)
        assert replay.complete("prompt one", CFG) == "answer"
        with pytest.raises(GenerationError):
            replay.complete("never seen", CFG)


class TestRetry:
    def test_success_passes_through(self):
        assert call_with_retry(lambda: 42) == 42

    def test_transient_failures_then_success(self):
        calls = {"n": 0}
        sleeps: list[float] = []

        def request():
            calls["n"] += 1
            if calls["n"] < 3:
                raise TransientProviderError("busy")
            return "done"

        got = call_with_retry(
            request, max_attempts=3, rng=random.Random(0), sleep=sleeps.append
        )
        assert got == "done"
        assert len(sleeps) == 2

    def test_backoff_grows_with_jitter_bounds(self):
        sleeps: list[float] = []

        def request():
            raise TransientProviderError("busy")

        with pytest.raises(RetryExhaustedError) as info:
            call_with_retry(
                request,
                max_attempts=4,
                base_backoff=1.0,
                rng=random.Random(7),
                sleep=sleeps.append,
            )
        assert len(info.value.attempts) == 4
        assert len(sleeps) == 3
        for attempt, delay in enumerate(sleeps, start=1):
            base = 1.0 * 2 ** (attempt - 1)
            assert 0.5 * base <= delay <= 1.5 * base

    def test_permanent_error_propagates_immediately(self):
        calls = {"n": 0}

        def request():
            calls["n"] += 1
            raise GenerationError("bad request")

        with pytest.raises(GenerationError):
            call_with_retry(request, max_attempts=5, sleep=lambda _: None)
        assert calls["n"] == 1


def chat_response(text):
    return {"choices": [{"message": {"content": text}}]}


class TestRemoteGenerator:
    def make(self, handler, **kwargs):
        transport = httpx.MockTransport(handler)
        client = httpx.Client(transport=transport)
        return RemoteGenerator(
            "https://provider.test/v1/chat", "model-x", client=client, **kwargs
        )

    def test_success_payload_shape(self):
        seen = {}

        def handler(request):
            seen.update(json.loads(request.content))
            return httpx.Response(200, json=chat_response("a completion"))

        gen = self.make(handler)
        got = gen.complete("the prompt", GenerationConfig(seed=11))
        assert got == "a completion"
        assert seen["model"] == "model-x"
        assert seen["messages"] == [{"role": "user", "content": "the prompt"}]
        assert seen["seed"] == 11

    def test_retries_on_server_error(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503)
            return httpx.Response(200, json=chat_response("ok"))

        gen = self.make(handler, base_backoff=0.0, rng=random.Random(1))
        assert gen.complete("p", CFG) == "ok"
        assert calls["n"] == 3

    def test_client_error_is_permanent(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, text="nope")

        gen = self.make(handler)
        with pytest.raises(GenerationError) as info:
            gen.complete("p", CFG)
        assert not isinstance(info.value, RetryExhaustedError)
        assert calls["n"] == 1

    def test_exhaustion_after_max_attempts(self):
        def handler(request):
            return httpx.Response(429)

        gen = self.make(handler, base_backoff=0.0, max_attempts=2, rng=random.Random(1))
        with pytest.raises(RetryExhaustedError):
            gen.complete("p", CFG)

    def test_malformed_body_is_permanent(self):
        def handler(request):
            return httpx.Response(200, json={"surprise": True})

        gen = self.make(handler)
        with pytest.raises(GenerationError):
            gen.complete("p", CFG)


class TestRemoteEmbedder:
    def test_memoizes_repeated_texts(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(200, json={"data": [{"embedding": [1.0, 2.0]}]})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        emb = RemoteEmbedder("https://provider.test/emb", "emb-x", 2, client=client)
        assert emb.embed("same text") == [1.0, 2.0]
        assert emb.embed("same text") == [1.0, 2.0]
        assert calls["n"] == 1

    def test_dimension_mismatch_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"data": [{"embedding": [1.0, 2.0, 3.0]}]})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        emb = RemoteEmbedder("https://provider.test/emb", "emb-x", 2, client=client)
        with pytest.raises(GenerationError):
            emb.embed("text")


class TestTemplates:
    def test_render_replaces_placeholders(self):
        assert render_template("Q: {{q}}!", {"q": "why"}) == "Q: why!"

    def test_unknown_placeholder_rejected(self):
        with pytest.raises(ValueError):
            render_template("{{missing}}", {})

    def test_knowledge_prompt_carries_sections(self):
        prompt = knowledge_prompt("the question", "t(a, b)", "t: a [1, 2]")
        assert "the question" in prompt
        assert "t(a, b)" in prompt
        assert "t: a [1, 2]" in prompt

    def test_sql_prompt_knowledge_is_optional(self):
        without = text2sql_prompt("q", "t(a)", None)
        empty = text2sql_prompt("q", "t(a)", decompose_knowledge(""))
        with_k = text2sql_prompt("q", "t(a)", decompose_knowledge("a refers to b"))
        assert "Knowledge:" not in without
        assert without == empty
        assert "Knowledge: a refers to b" in with_k

    def test_prompts_differ_only_in_inputs(self):
        a = knowledge_prompt("q1", "s", "v")
        b = knowledge_prompt("q2", "s", "v")
        assert a != b
        assert a.replace("q1", "q2") == b


class TestStripFences:
    def test_plain_text_unchanged(self):
        assert strip_fences("no fences here") == "no fences here"

    def test_fenced_block_unwrapped(self):
        assert strip_fences("```\ninner\n```") == "inner"
        assert strip_fences("```sql\nSELECT 1\n```") == "SELECT 1"

    def test_unterminated_fence(self):
        assert strip_fences("```\ndangling") == "dangling"


class TestExtractSql:
    def test_fenced_sql_preferred(self):
        completion = "Sure!\n```sql\nSELECT a\nFROM t;\n```\nSELECT wrong"
        assert extract_sql(completion) == "SELECT a\nFROM t"

    def test_keyword_line_fallback(self):
        completion = "The answer is:\n  SELECT x FROM t;\nhope that helps"
        assert extract_sql(completion) == "SELECT x FROM t"

    def test_with_and_values_count_as_sql(self):
        assert extract_sql("WITH c AS (SELECT 1) SELECT * FROM c").startswith("WITH")
        assert extract_sql("VALUES (1)").startswith("VALUES")

    def test_no_sql_raises(self):
        with pytest.raises(SqlExtractionError):
            extract_sql("I cannot answer that.")

    def test_empty_fence_falls_through_to_lines(self):
        assert extract_sql("```\n\n```\nSELECT 1") == "SELECT 1"


class TestGenerateKnowledge:
    def test_prompts_and_decomposes(self):
        class Input:
            question = "which county"
            schema_text = "frpm(cname)"
            subtables_text = ""

        gen = StaticGenerator("county refers to cname. rate refers to r.")
        knowledge = generate_knowledge(Input(), gen, CFG)
        assert knowledge.sub_knowledge == ("county refers to cname", "rate refers to r")
