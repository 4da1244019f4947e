"""Bundled synthetic mini-benchmark: two small databases, twenty instances.

Everything needed for an offline end-to-end run materializes from the
literals below: SQLite files, the instance file, gold knowledge, stub rule
tables for the knowledge and text-to-SQL providers, and a "divergent"
knowledge stub whose corrupted outputs drive both feedback passes.

The stub text-to-SQL provider answers with the knowledge-assisted query when
the prompt contains the instance's gold knowledge and with the baseline
query otherwise, so every downstream outcome is enumerable by hand.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from pathlib import Path

_CAMPUS_DDL = [
    "CREATE TABLE students (id INTEGER PRIMARY KEY, name TEXT, age INTEGER, gpa REAL, advisor TEXT)",
    "CREATE TABLE courses (code TEXT PRIMARY KEY, title TEXT, credits INTEGER, dept TEXT)",
    "CREATE TABLE enrollments (student_id INTEGER, course_code TEXT, grade REAL, term TEXT)",
]

_CAMPUS_ROWS = {
    "students": [
        (1, "Ada Lovelace", 19, 3.9, "Turing"),
        (2, "Alan Kay", 22, 3.4, "Turing"),
        (3, "Grace Hopper", 20, 3.8, "Knuth"),
        (4, "Edsger Dijkstra", 23, 3.6, "Knuth"),
        (5, "Barbara Liskov", 21, 3.95, "Ritchie"),
        (6, "Donald Duck", 25, 2.1, "Ritchie"),
        (7, "John Backus", 24, 2.9, "Turing"),
        (8, "Frances Allen", 18, 3.2, "Knuth"),
        (9, "Ivan Sutherland", 26, 3.5, "Ritchie"),
    ],
    "courses": [
        ("CS101", "Intro Programming", 4, "CS"),
        ("CS240", "Databases", 3, "CS"),
        ("MA201", "Linear Algebra", 3, "Math"),
        ("PH110", "Mechanics", 4, "Physics"),
        ("CS350", "Compilers", 3, "CS"),
        ("MA105", "Calculus", 4, "Math"),
    ],
    "enrollments": [
        (1, "CS101", 3.7, "fall"),
        (1, "CS240", 3.9, "fall"),
        (1, "MA201", 3.5, "spring"),
        (2, "CS101", 2.9, "fall"),
        (2, "CS240", 3.1, "spring"),
        (3, "CS240", 3.8, "fall"),
        (3, "MA105", 3.6, "fall"),
        (4, "CS350", 3.4, "spring"),
        (4, "CS240", 3.2, "spring"),
        (5, "CS350", 4.0, "fall"),
        (5, "MA201", 3.9, "fall"),
        (6, "PH110", 1.8, "fall"),
        (7, "CS101", 2.5, "spring"),
        (8, "MA105", 3.0, "fall"),
    ],
}

_RETAIL_DDL = [
    "CREATE TABLE products (sku TEXT PRIMARY KEY, name TEXT, price REAL, stock INTEGER, category TEXT)",
    "CREATE TABLE orders (order_id INTEGER PRIMARY KEY, sku TEXT, qty INTEGER, day TEXT, region TEXT)",
]

_RETAIL_ROWS = {
    "products": [
        ("P01", "Keyboard", 49.5, 120, "electronics"),
        ("P02", "Mouse", 19.9, 200, "electronics"),
        ("P03", "Desk Lamp", 35.0, 40, "home"),
        ("P04", "Notebook", 4.5, 500, "stationery"),
        ("P05", "Pen Pack", 6.0, 350, "stationery"),
        ("P06", "Monitor", 199.0, 30, "electronics"),
        ("P07", "Chair", 89.0, 25, "home"),
        ("P08", "Stapler", 12.5, 80, "stationery"),
    ],
    "orders": [
        (1, "P01", 2, "2024-01-05", "north"),
        (2, "P02", 5, "2024-01-06", "south"),
        (3, "P02", 3, "2024-01-07", "north"),
        (4, "P04", 10, "2024-01-08", "east"),
        (5, "P03", 1, "2024-01-09", "west"),
        (6, "P06", 1, "2024-01-10", "south"),
        (7, "P02", 4, "2024-01-11", "east"),
        (8, "P05", 6, "2024-01-12", "north"),
        (9, "P01", 1, "2024-01-13", "west"),
        (10, "P04", 8, "2024-01-14", "south"),
        (11, "P07", 12, "2024-01-15", "east"),
        (12, "P08", 3, "2024-01-16", "north"),
    ],
}


@dataclass(frozen=True)
class BenchInstance:
    id: str
    db_id: str
    difficulty: str
    question: str
    gold_sql: str
    evidence: str
    baseline_sql: str
    assisted_sql: str
    divergent: bool = False
    corrupt_evidence: str | None = None


INSTANCES: tuple[BenchInstance, ...] = (
    BenchInstance(
        id="c01",
        db_id="campus",
        difficulty="simple",
        question="How many students does advisor Turing have?",
        gold_sql="SELECT COUNT(*) FROM students WHERE advisor = 'Turing'",
        evidence="advisor Turing refers to advisor = 'Turing'",
        baseline_sql="SELECT COUNT(*) FROM students WHERE name = 'Turing'",
        assisted_sql="SELECT COUNT(*) FROM students WHERE advisor = 'Turing'",
    ),
    BenchInstance(
        id="c02",
        db_id="campus",
        difficulty="simple",
        question="List the names of students younger than 20.",
        gold_sql="SELECT name FROM students WHERE age < 20",
        evidence="younger than 20 refers to age < 20",
        baseline_sql="SELECT name FROM students WHERE age <= 20",
        assisted_sql="SELECT name FROM students WHERE age < 20",
    ),
    BenchInstance(
        id="c03",
        db_id="campus",
        difficulty="simple",
        question="How many courses belong to the CS department?",
        gold_sql="SELECT COUNT(*) FROM courses WHERE dept = 'CS'",
        evidence="the CS department refers to dept = 'CS'",
        baseline_sql="SELECT COUNT(*) FROM courses WHERE dept = 'CS'",
        assisted_sql="SELECT COUNT(*) FROM courses WHERE dept = 'CS'",
    ),
    BenchInstance(
        id="c04",
        db_id="campus",
        difficulty="moderate",
        question="What is the average grade across all enrollments?",
        gold_sql="SELECT AVG(grade) FROM enrollments",
        evidence="average grade refers to AVG(grade)",
        baseline_sql="SELECT AVG(grade) FROM enrollments",
        assisted_sql="SELECT AVG(grade) FROM enrollments",
    ),
    BenchInstance(
        id="c05",
        db_id="campus",
        difficulty="challenging",
        question="Which advisor has the highest average gpa among their students?",
        gold_sql="SELECT advisor FROM students GROUP BY advisor ORDER BY AVG(gpa) DESC LIMIT 1",
        evidence="highest average gpa refers to ORDER BY AVG(gpa) DESC LIMIT 1",
        baseline_sql="SELECT advisor FROM students ORDER BY gpa DESC LIMIT 1",
        assisted_sql="SELECT advisor FROM students GROUP BY advisor ORDER BY AVG(gpa) DESC LIMIT 2",
    ),
    BenchInstance(
        id="c06",
        db_id="campus",
        difficulty="moderate",
        question="How many students have a gpa of at least 3.5?",
        gold_sql="SELECT COUNT(*) FROM students WHERE gpa >= 3.5",
        evidence="gpa of at least 3.5 refers to gpa >= 3.5",
        baseline_sql="SELECT COUNT(*) FROM students WHERE gpa >= 3.5",
        assisted_sql="SELECT COUNT(*) FROM students WHERE gpa > 3.5",
    ),
    BenchInstance(
        id="c07",
        db_id="campus",
        difficulty="moderate",
        question="How many distinct students are enrolled in the Databases course?",
        gold_sql="SELECT COUNT(DISTINCT student_id) FROM enrollments WHERE course_code = 'CS240'",
        evidence="the Databases course refers to course_code = 'CS240'",
        baseline_sql="SELECT COUNT(DISTINCT student_id) FROM enrollments WHERE course_code = 'CS101'",
        assisted_sql="SELECT COUNT(DISTINCT student_id) FROM enrollments WHERE course_code = 'CS240'",
        divergent=True,
        corrupt_evidence="hint c07: databases live in filing cabinets",
    ),
    BenchInstance(
        id="c08",
        db_id="campus",
        difficulty="simple",
        question="List all course codes in the Math department.",
        gold_sql="SELECT code FROM courses WHERE dept = 'Math'",
        evidence="the Math department refers to dept = 'Math'",
        baseline_sql="SELECT code FROM courses WHERE dept = 'Math'",
        assisted_sql="SELECT code FROM courses WHERE dept = 'Math'",
        divergent=True,
        corrupt_evidence="hint c08: math is mostly numbers",
    ),
    BenchInstance(
        id="c09",
        db_id="campus",
        difficulty="challenging",
        question="What is the total number of credits for courses taken by the student named Ada Lovelace?",
        gold_sql=(
            "SELECT SUM(c.credits) FROM courses c"
            " JOIN enrollments e ON c.code = e.course_code"
            " JOIN students s ON s.id = e.student_id"
            " WHERE s.name = 'Ada Lovelace'"
        ),
        evidence=(
            "total credits refers to SUM(credits),"
            " student name refers to s.name = 'Ada Lovelace'"
        ),
        baseline_sql=(
            "SELECT SUM(c.credits) FROM courses c"
            " JOIN enrollments e ON c.code = e.course_code"
            " JOIN students s ON s.id = e.student_id"
            " WHERE s.name = 'Alan Kay'"
        ),
        assisted_sql=(
            "SELECT SUM(c.credits) FROM courses c"
            " JOIN enrollments e ON c.code = e.course_code"
            " JOIN students s ON s.id = e.student_id"
            " WHERE s.name = 'Barbara Liskov'"
        ),
        divergent=True,
        corrupt_evidence="hint c09: libraries count books not credits",
    ),
    BenchInstance(
        id="c10",
        db_id="campus",
        difficulty="simple",
        question="How many enrollments were recorded in the fall term?",
        gold_sql="SELECT COUNT(*) FROM enrollments WHERE term = 'fall'",
        evidence="the fall term refers to term = 'fall'",
        baseline_sql="SELECT COUNT(*) FROM enrollments WHERE term = 'fall'",
        assisted_sql="SELECT COUNT(*) FROM enrollments WHERE term = 'fall'",
        divergent=True,
        corrupt_evidence="hint c10: autumn leaves drift slowly",
    ),
    BenchInstance(
        id="r01",
        db_id="retail",
        difficulty="simple",
        question="How many products are in the electronics category?",
        gold_sql="SELECT COUNT(*) FROM products WHERE category = 'electronics'",
        evidence="the electronics category refers to category = 'electronics'",
        baseline_sql="SELECT COUNT(*) FROM products WHERE category = 'Electronics'",
        assisted_sql="SELECT COUNT(*) FROM products WHERE category = 'electronics'",
    ),
    BenchInstance(
        id="r02",
        db_id="retail",
        difficulty="moderate",
        question="What is the total quantity ordered from the north region?",
        gold_sql="SELECT SUM(qty) FROM orders WHERE region = 'north'",
        evidence="the north region refers to region = 'north'",
        baseline_sql="SELECT SUM(qty) FROM orders WHERE region = 'North'",
        assisted_sql="SELECT SUM(qty) FROM orders WHERE region = 'north'",
    ),
    BenchInstance(
        id="r03",
        db_id="retail",
        difficulty="simple",
        question="How many orders are there in total?",
        gold_sql="SELECT COUNT(*) FROM orders",
        evidence="the total number of orders refers to COUNT(*)",
        baseline_sql="SELECT COUNT(*) FROM orders",
        assisted_sql="SELECT COUNT(*) FROM orders",
    ),
    BenchInstance(
        id="r04",
        db_id="retail",
        difficulty="simple",
        question="List the names of products costing more than 50.",
        gold_sql="SELECT name FROM products WHERE price > 50",
        evidence="costing more than 50 refers to price > 50",
        baseline_sql="SELECT name FROM products WHERE price > 50",
        assisted_sql="SELECT name FROM products WHERE price > 50",
    ),
    BenchInstance(
        id="r05",
        db_id="retail",
        difficulty="challenging",
        question="What is the name of the product with the most units ordered?",
        gold_sql=(
            "SELECT p.name FROM products p JOIN orders o ON p.sku = o.sku"
            " GROUP BY p.sku ORDER BY SUM(o.qty) DESC LIMIT 1"
        ),
        evidence="most units ordered refers to ORDER BY SUM(o.qty) DESC LIMIT 1",
        baseline_sql=(
            "SELECT p.name FROM products p JOIN orders o ON p.sku = o.sku"
            " ORDER BY o.qty DESC LIMIT 1"
        ),
        assisted_sql=(
            "SELECT p.name FROM products p JOIN orders o ON p.sku = o.sku"
            " GROUP BY p.sku ORDER BY SUM(o.qty) DESC LIMIT 1"
        ),
    ),
    BenchInstance(
        id="r06",
        db_id="retail",
        difficulty="moderate",
        question="Which region has the fewest orders?",
        gold_sql=(
            "SELECT region FROM orders GROUP BY region"
            " ORDER BY COUNT(*) ASC, region ASC LIMIT 1"
        ),
        evidence="fewest orders refers to ORDER BY COUNT(*) ASC",
        baseline_sql=(
            "SELECT region FROM orders GROUP BY region"
            " ORDER BY COUNT(*) DESC, region ASC LIMIT 1"
        ),
        assisted_sql=(
            "SELECT region FROM orders GROUP BY region"
            " ORDER BY COUNT(*) DESC, region ASC LIMIT 1"
        ),
    ),
    BenchInstance(
        id="r07",
        db_id="retail",
        difficulty="moderate",
        question="How many orders were placed for the Mouse product?",
        gold_sql=(
            "SELECT COUNT(*) FROM orders o JOIN products p ON p.sku = o.sku"
            " WHERE p.name = 'Mouse'"
        ),
        evidence="the Mouse product refers to p.name = 'Mouse'",
        baseline_sql=(
            "SELECT COUNT(*) FROM orders o JOIN products p ON p.sku = o.sku"
            " WHERE p.name = 'Monitor'"
        ),
        assisted_sql=(
            "SELECT COUNT(*) FROM orders o JOIN products p ON p.sku = o.sku"
            " WHERE p.name = 'Mouse'"
        ),
        divergent=True,
        corrupt_evidence="hint r07: mice prefer cheese",
    ),
    BenchInstance(
        id="r08",
        db_id="retail",
        difficulty="simple",
        question="What is the cheapest product price?",
        gold_sql="SELECT MIN(price) FROM products",
        evidence="cheapest refers to the lowest price in the catalog",
        baseline_sql="SELECT MIN(price) FROM products",
        assisted_sql="SELECT MIN(price) FROM products",
        divergent=True,
        corrupt_evidence="hint r08: pennies stack up",
    ),
    BenchInstance(
        id="r09",
        db_id="retail",
        difficulty="moderate",
        question="How many distinct regions appear in the orders table?",
        gold_sql="SELECT COUNT(DISTINCT region) FROM orders",
        evidence="distinct regions refers to COUNT(DISTINCT region)",
        baseline_sql="SELECT COUNT(region) FROM orders",
        assisted_sql="SELECT COUNT(DISTINCT region FROM orders",
        divergent=True,
        corrupt_evidence="hint r09: compasses point north",
    ),
    BenchInstance(
        id="r10",
        db_id="retail",
        difficulty="simple",
        question="How many products are currently stocked above 100 units?",
        gold_sql="SELECT COUNT(*) FROM products WHERE stock > 100",
        evidence="stocked above 100 units refers to stock > 100",
        baseline_sql="SELECT COUNT(*) FROM products WHERE stock > 100",
        assisted_sql="SELECT COUNT(*) FROM products WHERE stock > 50",
        divergent=True,
        corrupt_evidence="hint r10: warehouses echo at night",
    ),
)

# Divergent instances whose assisted and baseline queries return different
# results (and both execute): the database-feedback pairs.
EXPECTED_DB_PAIR_IDS = ("c07", "c09", "r07", "r10")

# Divergent instances whose gold knowledge is fully contained in the gold SQL:
# the contribution-feedback pairs (corrupted knowledge is never contained).
EXPECTED_SQL_PAIR_IDS = ("c07", "c08", "c10", "r07", "r09", "r10")

# After dedup (db wins shared instances) the dataset holds, in order:
EXPECTED_DATASET = (
    ("c07", "db"),
    ("c08", "sql"),
    ("c09", "db"),
    ("c10", "sql"),
    ("r07", "db"),
    ("r09", "sql"),
    ("r10", "db"),
)

# Gold-knowledge prediction of r09 fails to execute, so the db pass
# quarantines it; its contribution pair above is unaffected.
EXPECTED_DB_QUARANTINE_IDS = ("r09",)

# Baseline-vs-assisted influence for the divergent-stub configuration, where
# the assisted arm of a divergent instance sees corrupted knowledge and thus
# answers with its baseline query.
EXPECTED_INFLUENCE = {
    "assistance": 5,  # c01 c02 r01 r02 r05
    "misleading": 1,  # c06
    "inoperative": 6,  # c05 r06 c07 c09 r07 r09
    "sustainable": 8,  # c03 c04 r03 r04 c08 c10 r08 r10
}

EXPECTED_BASELINE_EX = 45.0  # 9 of 20: sustainable + misleading
EXPECTED_ASSISTED_EX = 65.0  # 13 of 20: sustainable + assistance


def _write_db(path: Path, ddl: list[str], rows: dict[str, list[tuple]]) -> None:
    if path.exists():
        path.unlink()
    conn = sqlite3.connect(path)
    try:
        for statement in ddl:
            conn.execute(statement)
        for table, table_rows in rows.items():
            if not table_rows:
                continue
            placeholders = ", ".join("?" * len(table_rows[0]))
            conn.executemany(f"INSERT INTO {table} VALUES ({placeholders})", table_rows)
        conn.commit()
    finally:
        conn.close()


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def materialize(dest: Path) -> dict[str, Path]:
    """Write the complete mini-benchmark below ``dest`` and return the paths.

    Layout: dbs/<db_id>/<db_id>.sqlite, instances.jsonl, and three stub rule
    tables (knowledge gold, knowledge divergent, text-to-SQL).
    """
    dest = Path(dest)
    dbs_root = dest / "dbs"
    (dbs_root / "campus").mkdir(parents=True, exist_ok=True)
    (dbs_root / "retail").mkdir(parents=True, exist_ok=True)
    _write_db(dbs_root / "campus" / "campus.sqlite", _CAMPUS_DDL, _CAMPUS_ROWS)
    _write_db(dbs_root / "retail" / "retail.sqlite", _RETAIL_DDL, _RETAIL_ROWS)

    instances = [
        {
            "id": spec.id,
            "question": spec.question,
            "SQL": spec.gold_sql,
            "db_id": spec.db_id,
            "evidence": spec.evidence,
            "difficulty": spec.difficulty,
        }
        for spec in INSTANCES
    ]
    instances_path = dest / "instances.jsonl"
    _write_jsonl(instances_path, instances)

    knowledge_gold = [{"match": spec.question, "completion": spec.evidence} for spec in INSTANCES]
    knowledge_gold_path = dest / "stub_knowledge_gold.jsonl"
    _write_jsonl(knowledge_gold_path, knowledge_gold)

    knowledge_divergent = [
        {
            "match": spec.question,
            "completion": spec.corrupt_evidence if spec.divergent else spec.evidence,
        }
        for spec in INSTANCES
    ]
    knowledge_divergent_path = dest / "stub_knowledge_divergent.jsonl"
    _write_jsonl(knowledge_divergent_path, knowledge_divergent)

    # knowledge-triggered rules first: a prompt carrying the gold evidence
    # answers with the assisted query, any other prompt falls through to the
    # question-triggered baseline rule
    text2sql_rules = [
        {"match": spec.evidence, "completion": spec.assisted_sql} for spec in INSTANCES
    ] + [{"match": spec.question, "completion": spec.baseline_sql} for spec in INSTANCES]
    text2sql_path = dest / "stub_text2sql.jsonl"
    _write_jsonl(text2sql_path, text2sql_rules)

    return {
        "root": dest,
        "dbs_root": dbs_root,
        "instances": instances_path,
        "stub_knowledge_gold": knowledge_gold_path,
        "stub_knowledge_divergent": knowledge_divergent_path,
        "stub_text2sql": text2sql_path,
    }
