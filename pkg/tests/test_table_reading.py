"""Question-to-column similarity matching and subtable selection."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from k2sql.model import Column, DatabaseSchema, Table
from k2sql.table_reading import (
    ColumnMatch,
    ColumnMatchSet,
    SimilarityConfig,
    TokenOverlapEmbedder,
    column_descriptor,
    cosine,
    match_columns,
    select_subtables,
    similarity,
)


def make_schema(tables: dict[str, list[str]]) -> DatabaseSchema:
    return DatabaseSchema(
        db_id="d",
        tables=tuple(
            Table(name=n, columns=tuple(Column(name=c) for c in cols))
            for n, cols in tables.items()
        ),
        db_file_path="d.sqlite",
    )


class TestCosine:
    def test_identical_vectors(self):
        assert cosine([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_zero_vector_scores_zero(self):
        assert cosine([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_hand_computed_value(self):
        # dot = 1*2 + 2*1 = 4; norms = sqrt(5) each; cos = 4/5
        assert cosine([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8)

    def test_clamped_to_unit_interval(self):
        v = [1e-180] * 3
        assert -1.0 <= cosine(v, v) <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-10, 10), min_size=1, max_size=8),
        st.lists(st.floats(-10, 10), min_size=1, max_size=8),
    )
    def test_symmetric_and_bounded(self, u, v):
        n = min(len(u), len(v))
        u, v = u[:n], v[:n]
        assert cosine(u, v) == cosine(v, u)
        assert -1.0 <= cosine(u, v) <= 1.0


class TestEmbedder:
    def test_deterministic_across_instances(self):
        a = TokenOverlapEmbedder().embed("free meal count")
        b = TokenOverlapEmbedder().embed("free meal count")
        assert a == b

    def test_token_counts_accumulate(self):
        e = TokenOverlapEmbedder()
        once = e.embed("meal")
        twice = e.embed("meal meal")
        assert sum(twice) == 2 * sum(once)

    def test_case_and_punctuation_insensitive(self):
        e = TokenOverlapEmbedder()
        assert e.embed("Free-Meal!") == e.embed("free meal")

    def test_self_similarity_is_one(self):
        col = Column(name="free meal count")
        score = similarity("free meal count", col, TokenOverlapEmbedder())
        assert score == pytest.approx(1.0)


class TestSimilarity:
    def test_hand_cosine_oracle(self):
        # question tokens: eligible free rate -> 3 distinct
        # descriptor "frpm" + "count" -> overlap only on none; use overlapping pair
        e = TokenOverlapEmbedder()
        question = "free meal count"
        col = Column(name="count")
        got = similarity(question, col, e, table_name="meals")
        # descriptor "meals count": shared token "count"; cos = 1/(sqrt(3)*sqrt(2))
        assert got == pytest.approx(1.0 / math.sqrt(6))

    def test_descriptor_includes_description(self):
        col = Column(name="cname", description="county name")
        assert column_descriptor("frpm", col) == "frpm cname county name"
        bare = Column(name="cname")
        assert column_descriptor("", bare) == "cname"


class TestMatchColumns:
    SCHEMA = make_schema({"meals": ["count", "rate"], "schools": ["sname", "county"]})

    def brute_force(self, question, schema, config):
        found = []
        for table in schema.tables:
            for col in table.columns:
                score = similarity(question, col, config.embedder, table.name)
                if score > config.alpha:
                    found.append((table.name, col.name, score))
        found.sort(key=lambda t: (-t[2], t[0], t[1]))
        return found

    def test_matches_brute_force(self):
        config = SimilarityConfig(alpha=0.1)
        questions = [
            "how many meals were counted",
            "county of each school",
            "rate of free meals in schools",
            "unrelated text entirely",
        ]
        for q in questions:
            got = match_columns(q, self.SCHEMA, config)
            expect = self.brute_force(q, self.SCHEMA, config)
            assert [(m.table, m.column, m.score) for m in got.entries] == expect

    def test_threshold_is_strict(self):
        # "meals count" vs descriptor "meals count": similarity exactly 1.0
        schema = make_schema({"meals": ["count"]})
        exact = match_columns("meals count", schema, SimilarityConfig(alpha=1.0))
        assert exact.entries == ()
        below = match_columns("meals count", schema, SimilarityConfig(alpha=0.999))
        assert len(below.entries) == 1

    def test_alpha_monotonicity(self):
        q = "rate of free meals in county schools"
        sizes = []
        for alpha in (0.0, 0.2, 0.4, 0.6, 0.8):
            got = match_columns(q, self.SCHEMA, SimilarityConfig(alpha=alpha))
            sizes.append(len(got.entries))
        assert sizes == sorted(sizes, reverse=True)

    def test_nested_match_sets_across_alphas(self):
        q = "rate of free meals in county schools"
        previous = None
        for alpha in (0.8, 0.4, 0.1, 0.0):
            got = {
                (m.table, m.column)
                for m in match_columns(q, self.SCHEMA, SimilarityConfig(alpha=alpha)).entries
            }
            if previous is not None:
                assert previous <= got
            previous = got


class TestSelectSubtables:
    SCHEMA = make_schema({"a": ["x", "y"], "b": ["z"]})

    def matches(self, *triples):
        return ColumnMatchSet(tuple(ColumnMatch(t, c, s) for t, c, s in triples))

    def test_groups_in_schema_order(self):
        m = self.matches(("b", "z", 0.9), ("a", "y", 0.8), ("a", "x", 0.7))
        assert select_subtables(m, self.SCHEMA) == {"a": ["x", "y"], "b": ["z"]}

    def test_max_columns_keeps_top_scores(self):
        m = self.matches(("b", "z", 0.9), ("a", "y", 0.8), ("a", "x", 0.7))
        assert select_subtables(m, self.SCHEMA, max_columns=2) == {"a": ["y"], "b": ["z"]}

    def test_column_order_follows_schema(self):
        m = self.matches(("a", "y", 0.9), ("a", "x", 0.2))
        assert select_subtables(m, self.SCHEMA)["a"] == ["x", "y"]

    def test_unknown_column_rejected(self):
        m = self.matches(("a", "nope", 0.9))
        with pytest.raises(ValueError):
            select_subtables(m, self.SCHEMA)

    def test_nonpositive_max_columns_rejected(self):
        with pytest.raises(ValueError):
            select_subtables(self.matches(), self.SCHEMA, max_columns=0)

    def test_empty_matches_give_empty_selection(self):
        assert select_subtables(self.matches(), self.SCHEMA) == {}


class TestConfigValidation:
    def test_unsorted_match_set_rejected(self):
        with pytest.raises(ValueError):
            ColumnMatchSet((ColumnMatch("a", "x", 0.1), ColumnMatch("a", "y", 0.9)))

    def test_alpha_must_be_finite(self):
        with pytest.raises(ValueError):
            SimilarityConfig(alpha=math.nan)
