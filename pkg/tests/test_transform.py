"""Declarative transform plans and the sandboxed expression language."""
import pytest

from textsteer.errors import TransformError
from textsteer.tools.transform import Expr, transform_run

ROWS = [
    {"id": "r1", "topic": "camera", "score": 4, "tags": ["a", "b"]},
    {"id": "r2", "topic": "battery", "score": 2, "tags": ["c"]},
    {"id": "r3", "topic": "camera", "score": 5, "tags": []},
    {"id": "r4", "topic": "shipping", "score": 1, "tags": ["d", "e"]},
]


def test_inputs_not_mutated():
    rows = [dict(r) for r in ROWS]
    transform_run([{"op": "compute", "key": "double", "expr": "score * 2"}], rows)
    assert rows == ROWS


def test_select():
    out = transform_run([{"op": "select", "keys": ["id", "score"]}], ROWS)
    assert out == [{"id": r["id"], "score": r["score"]} for r in ROWS]


def test_rename():
    out = transform_run([{"op": "rename", "mapping": {"topic": "theme"}}], ROWS)
    assert out[0]["theme"] == "camera" and "topic" not in out[0]


def test_filter():
    out = transform_run([{"op": "filter", "expr": "score >= 4"}], ROWS)
    assert [r["id"] for r in out] == ["r1", "r3"]


def test_compute():
    out = transform_run([{"op": "compute", "key": "loud", "expr": "upper(topic)"}], ROWS)
    assert [r["loud"] for r in out] == ["CAMERA", "BATTERY", "CAMERA", "SHIPPING"]


def test_sort_and_limit():
    out = transform_run([{"op": "sort", "key": "score", "dir": "desc"},
                         {"op": "limit", "n": 2}], ROWS)
    assert [r["id"] for r in out] == ["r3", "r1"]


def test_flatten():
    out = transform_run([{"op": "flatten", "key": "tags"}], ROWS)
    # one row per list element; empty lists vanish
    assert [(r["id"], r["tags"]) for r in out] == [
        ("r1", "a"), ("r1", "b"), ("r2", "c"), ("r4", "d"), ("r4", "e")]


def test_group_by_aggregate():
    out = transform_run([
        {"op": "group_by", "keys": ["topic"]},
        {"op": "aggregate", "aggregations": [
            {"op": "count", "as": "n"},
            {"op": "mean", "key": "score", "as": "avg"},
            {"op": "sum", "key": "score"},
            {"op": "collect", "key": "id", "as": "members"},
            {"op": "concat", "key": "id", "as": "joined"},
        ]},
    ], ROWS)
    by_topic = {r["topic"]: r for r in out}
    assert by_topic["camera"] == {"topic": "camera", "n": 2, "avg": 4.5,
                                  "score_sum": 9, "members": ["r1", "r3"],
                                  "joined": "r1 r3"}
    assert by_topic["shipping"]["n"] == 1


def test_group_by_requires_aggregate():
    with pytest.raises(TransformError, match="only aggregate may follow group_by"):
        transform_run([{"op": "group_by", "keys": ["topic"]},
                       {"op": "limit", "n": 1}], ROWS)
    with pytest.raises(TransformError, match="ends with group_by"):
        transform_run([{"op": "group_by", "keys": ["topic"]}], ROWS)
    with pytest.raises(TransformError, match="requires a prior group_by"):
        transform_run([{"op": "aggregate", "aggregations": []}], ROWS)


def test_step_errors_carry_index():
    with pytest.raises(TransformError, match="step 1:"):
        transform_run([{"op": "limit", "n": 3}, {"op": "frobnicate"}], ROWS)
    with pytest.raises(TransformError, match="unknown field"):
        transform_run([{"op": "sort", "key": "ghost"}], ROWS)
    with pytest.raises(TransformError):
        transform_run([{"op": "limit", "n": -1}], ROWS)
    with pytest.raises(TransformError):
        transform_run([{"op": "flatten", "key": "score"}], ROWS)  # not a list


def test_pipeline_of_steps_matches_manual_composition():
    plan = [
        {"op": "filter", "expr": "score > 1"},
        {"op": "compute", "key": "label", "expr": "topic + '-' + str(score)"},
        {"op": "select", "keys": ["id", "label"]},
        {"op": "sort", "key": "label"},
    ]
    expected = sorted(
        ({"id": r["id"], "label": f"{r['topic']}-{r['score']}"}
         for r in ROWS if r["score"] > 1),
        key=lambda r: r["label"])
    assert transform_run(plan, ROWS) == expected


# -- expression language -----------------------------------------------------


def test_expr_arithmetic_and_logic():
    obj = {"a": 7, "b": 2, "name": "Widget"}
    assert Expr("a + b * 3").evaluate(obj) == 13
    assert Expr("a // b").evaluate(obj) == 3
    assert Expr("a % b").evaluate(obj) == 1
    assert Expr("-a").evaluate(obj) == -7
    assert Expr("a > 5 and b < 3").evaluate(obj) is True
    assert Expr("not (a == 7)").evaluate(obj) is False
    assert Expr("1 < b < 3").evaluate(obj) is True
    assert Expr("'x' if a > b else 'y'").evaluate(obj) == "x"
    assert Expr("contains(lower(name), 'widg')").evaluate(obj) is True
    assert Expr("startswith(name, 'Wid')").evaluate(obj) is True
    assert Expr("len(name)").evaluate(obj) == 6
    assert Expr("round(a / b)").evaluate(obj) == 4
    assert Expr("'dg' in name").evaluate(obj) is True


def test_expr_unknown_field():
    with pytest.raises(TransformError, match="unknown field"):
        Expr("ghost + 1").evaluate({"a": 1})


@pytest.mark.parametrize("source", [
    "__import__('os')",
    "(1).__class__",
    "obj.attr",
    "[1,2][0]",
    "lambda x: x",
    "exec('1')",
    "open('/etc/passwd')",
    "{'a': 1}",
    "x = 1",
    "f'{a}'",
])
def test_expr_rejects_unsafe_constructs(source):
    with pytest.raises(TransformError):
        Expr(source)


def test_expr_rejects_keyword_args_and_size():
    with pytest.raises(TransformError):
        Expr("round(1.5, ndigits=0)")
    with pytest.raises(TransformError, match="too large"):
        Expr("+".join(["1"] * 201))


def test_expr_type_errors_are_wrapped():
    with pytest.raises(TransformError, match="type error"):
        Expr("a + 1").evaluate({"a": "text"})
    with pytest.raises(TransformError, match="type error"):
        Expr("a / 0").evaluate({"a": 1})
