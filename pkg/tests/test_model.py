"""Knowledge decomposition and the schema value objects."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from k2sql.model import (
    Column,
    DatabaseSchema,
    Difficulty,
    Instance,
    Knowledge,
    Table,
    decompose_knowledge,
    schema_to_text,
)


def frags(text):
    return decompose_knowledge(text).sub_knowledge


class TestDecompose:
    def test_empty_text_gives_no_fragments(self):
        assert frags("") == ()
        assert frags("   \n\t ") == ()
        assert decompose_knowledge("  ").is_empty

    def test_single_statement_passes_through(self):
        assert frags("eligible free rate = Free Meal Count / Enrollment") == (
            "eligible free rate = Free Meal Count / Enrollment",
        )

    def test_sentences_split_on_terminators(self):
        assert frags("First fact. Second fact! Third fact?") == (
            "First fact",
            "Second fact",
            "Third fact",
        )
        assert frags("a = 1; b = 2") == ("a = 1", "b = 2")

    def test_comma_splits_only_between_two_marked_clauses(self):
        text = "highest rate refers to MAX(rate), county refers to cname"
        assert frags(text) == (
            "highest rate refers to MAX(rate)",
            "county refers to cname",
        )
        # unmarked right side stays attached
        assert frags("x refers to a, b and c") == ("x refers to a, b and c",)
        # unmarked left side too
        assert frags("in schools, rate refers to r") == ("in schools, rate refers to r",)

    def test_two_fragment_equals_pair(self):
        text = "total credits refers to SUM(credits), student name refers to s.name = 'Ada Lovelace'"
        assert frags(text) == (
            "total credits refers to SUM(credits)",
            "student name refers to s.name = 'Ada Lovelace'",
        )

    def test_decimals_and_dotted_names_survive(self):
        assert frags("gpa above 3.5 refers to gpa > 3.5") == (
            "gpa above 3.5 refers to gpa > 3.5",
        )
        assert frags("name refers to s.name") == ("name refers to s.name",)

    def test_quoted_regions_are_immune(self):
        assert frags("name = 'a. b, c = d'") == ("name = 'a. b, c = d'",)
        assert frags('code = "x; y"') == ('code = "x; y"',)
        assert frags("col = `a, b = c`") == ("col = `a, b = c`",)

    def test_unclosed_quote_does_not_protect(self):
        # only a closed quote region suppresses the splitters
        text = "name = 'unterminated, x = y"
        assert frags(text) == ("name = 'unterminated", "x = y")

    def test_fragments_strip_trailing_terminators(self):
        assert frags("a refers to b.") == ("a refers to b",)
        assert frags("a = b., c = d") == ("a = b", "c = d")

    def test_original_text_is_kept(self):
        text = "First. Second."
        assert decompose_knowledge(text).text == text


@st.composite
def knowledge_texts(draw):
    words = st.text(
        alphabet="abcdefgXYZ0123.',=;!?\"` ", min_size=0, max_size=60
    )
    return draw(words)


class TestDecomposeProperties:
    @settings(max_examples=300, deadline=None)
    @given(knowledge_texts())
    def test_idempotent(self, text):
        once = decompose_knowledge(text)
        for fragment in once.sub_knowledge:
            again = decompose_knowledge(fragment)
            assert again.sub_knowledge == (fragment,) or again.sub_knowledge == ()

    @settings(max_examples=300, deadline=None)
    @given(knowledge_texts())
    def test_fragments_are_subsequences(self, text):
        for fragment in frags(text):
            assert fragment
            assert fragment in text

    @settings(max_examples=200, deadline=None)
    @given(knowledge_texts())
    def test_fragments_never_overlap(self, text):
        cursor = 0
        for fragment in frags(text):
            start = text.index(fragment, cursor)
            cursor = start + len(fragment)


class TestSchemaObjects:
    def test_schema_text_layout(self):
        schema = DatabaseSchema(
            db_id="d",
            tables=(
                Table("users", (Column("id"), Column("name"))),
                Table("posts", (Column("id"), Column("author"))),
            ),
            db_file_path="d.sqlite",
        )
        assert schema_to_text(schema) == "table users(id, name)\ntable posts(id, author)"

    def test_duplicate_columns_rejected(self):
        with pytest.raises(ValueError):
            Table("t", (Column("a"), Column("a")))

    def test_duplicate_tables_rejected(self):
        t = Table("t", (Column("a"),))
        with pytest.raises(ValueError):
            DatabaseSchema("d", (t, t), "d.sqlite")

    def test_table_lookup(self):
        t = Table("t", (Column("a"),))
        schema = DatabaseSchema("d", (t,), "d.sqlite")
        assert schema.table("t") is t
        with pytest.raises(KeyError):
            schema.table("missing")

    def test_instance_validation(self):
        with pytest.raises(ValueError):
            Instance(id="", question="q", gold_sql="SELECT 1", db_id="d")
        with pytest.raises(ValueError):
            Instance(id="i", question="", gold_sql="SELECT 1", db_id="d")

    def test_difficulty_parse(self):
        assert Difficulty.parse("Simple") is Difficulty.SIMPLE
        assert Difficulty.parse(None) is Difficulty.UNKNOWN
        with pytest.raises(ValueError):
            Difficulty.parse("extreme")

    def test_knowledge_is_empty(self):
        assert Knowledge("").is_empty
        assert not decompose_knowledge("a refers to b").is_empty
