"""Structured data transformation: a step plan plus a safe expression language.

The plan replaces model-written executable code: every step is declarative,
side-effect free, and bounded, so transformations are deterministic and
sandbox-safe. Expressions are parsed with the ast module and evaluated
against a whitelist of node types and functions; field names resolve to
object fields.
"""
from __future__ import annotations

import ast

from ..errors import TransformError

STEP_OPS = ("select", "rename", "filter", "group_by", "aggregate", "flatten",
            "sort", "limit", "compute")
AGG_OPS = ("count", "sum", "mean", "concat", "collect")

MAX_EXPR_NODES = 200

_FUNCTIONS = {
    "len": len,
    "lower": lambda s: str(s).lower(),
    "upper": lambda s: str(s).upper(),
    "abs": abs,
    "round": round,
    "min": min,
    "max": max,
    "str": str,
    "int": int,
    "float": float,
    "contains": lambda a, b: b in a,
    "startswith": lambda a, b: str(a).startswith(str(b)),
}

_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.Call,
    ast.Name, ast.Constant, ast.IfExp, ast.Load,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.Mod, ast.Pow,
    ast.USub, ast.UAdd, ast.Not, ast.And, ast.Or,
    ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.In, ast.NotIn,
)


class Expr:
    """A compiled side-effect-free expression over object fields."""

    def __init__(self, source: str):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise TransformError(f"bad expression {source!r}: {exc.msg}") from exc
        nodes = list(ast.walk(tree))
        if len(nodes) > MAX_EXPR_NODES:
            raise TransformError(f"expression too large: {source!r}")
        for node in nodes:
            if not isinstance(node, _ALLOWED):
                raise TransformError(
                    f"disallowed construct {type(node).__name__} in {source!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                    raise TransformError(f"unknown function call in {source!r}")
                if node.keywords:
                    raise TransformError(f"keyword arguments not allowed in {source!r}")
        self._tree = tree

    def evaluate(self, obj: dict):
        return self._eval(self._tree.body, obj)

    def _eval(self, node, obj):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in obj:
                return obj[node.id]
            raise TransformError(f"unknown field {node.id!r} in expression {self.source!r}")
        if isinstance(node, ast.Call):
            args = [self._eval(a, obj) for a in node.args]
            try:
                return _FUNCTIONS[node.func.id](*args)
            except (TypeError, ValueError) as exc:
                raise TransformError(f"type error in {self.source!r}: {exc}") from exc
        if isinstance(node, ast.BinOp):
            left, right = self._eval(node.left, obj), self._eval(node.right, obj)
            try:
                return _BIN_OPS[type(node.op)](left, right)
            except (TypeError, ZeroDivisionError) as exc:
                raise TransformError(f"type error in {self.source!r}: {exc}") from exc
        if isinstance(node, ast.UnaryOp):
            value = self._eval(node.operand, obj)
            return _UNARY_OPS[type(node.op)](value)
        if isinstance(node, ast.BoolOp):
            values = (self._eval(v, obj) for v in node.values)
            return all(values) if isinstance(node.op, ast.And) else any(values)
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, obj)
            for op, comparator in zip(node.ops, node.comparators):
                right = self._eval(comparator, obj)
                try:
                    if not _CMP_OPS[type(op)](left, right):
                        return False
                except TypeError as exc:
                    raise TransformError(f"type error in {self.source!r}: {exc}") from exc
                left = right
            return True
        if isinstance(node, ast.IfExp):
            return (self._eval(node.body, obj) if self._eval(node.test, obj)
                    else self._eval(node.orelse, obj))
        raise TransformError(f"unsupported node in {self.source!r}")


_BIN_OPS = {
    ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b,
    ast.FloorDiv: lambda a, b: a // b, ast.Mod: lambda a, b: a % b,
    ast.Pow: lambda a, b: a ** b,
}
_UNARY_OPS = {ast.USub: lambda v: -v, ast.UAdd: lambda v: +v, ast.Not: lambda v: not v}
_CMP_OPS = {
    ast.Eq: lambda a, b: a == b, ast.NotEq: lambda a, b: a != b,
    ast.Lt: lambda a, b: a < b, ast.LtE: lambda a, b: a <= b,
    ast.Gt: lambda a, b: a > b, ast.GtE: lambda a, b: a >= b,
    ast.In: lambda a, b: a in b, ast.NotIn: lambda a, b: a not in b,
}


def transform_run(plan: list[dict], objects: list[dict]) -> list[dict]:
    """Apply the step plan to a copy of the objects; inputs are never mutated."""
    data = [dict(obj) for obj in objects]
    grouped = None  # (group_keys, {key_tuple: [objs]}) after group_by
    for i, step in enumerate(plan):
        op = step.get("op")
        if op not in STEP_OPS:
            raise TransformError(f"step {i}: unknown op {op!r}")
        if op == "group_by":
            keys = list(step.get("keys", []))
            if not keys:
                raise TransformError(f"step {i}: group_by needs keys")
            groups: dict = {}
            for obj in data:
                try:
                    key = tuple(obj[k] for k in keys)
                except KeyError as exc:
                    raise TransformError(f"step {i}: unknown field {exc.args[0]!r}") from None
                groups.setdefault(key, []).append(obj)
            grouped = (keys, groups)
            continue
        if op == "aggregate":
            if grouped is None:
                raise TransformError(f"step {i}: aggregate requires a prior group_by")
            keys, groups = grouped
            data = [_aggregate_group(step, keys, key, members, i)
                    for key, members in groups.items()]
            grouped = None
            continue
        if grouped is not None:
            raise TransformError(f"step {i}: only aggregate may follow group_by")
        data = _apply_flat_step(op, step, data, i)
    if grouped is not None:
        raise TransformError("plan ends with group_by but no aggregate")
    return data


def _aggregate_group(step, group_keys, key_values, members, index) -> dict:
    out = dict(zip(group_keys, key_values))
    for agg in step.get("aggregations", []):
        op = agg.get("op")
        if op not in AGG_OPS:
            raise TransformError(f"step {index}: unknown aggregate op {op!r}")
        target = agg.get("as") or (f"{agg.get('key', 'value')}_{op}")
        if op == "count":
            out[target] = len(members)
            continue
        field = agg.get("key")
        try:
            values = [m[field] for m in members]
        except KeyError:
            raise TransformError(f"step {index}: unknown field {field!r}") from None
        if op == "sum":
            out[target] = sum(values)
        elif op == "mean":
            out[target] = sum(values) / len(values)
        elif op == "concat":
            out[target] = " ".join(str(v) for v in values)
        else:  # collect
            out[target] = list(values)
    return out


def _apply_flat_step(op, step, data, index):
    if op == "select":
        keys = list(step.get("keys", []))
        missing = [k for k in keys for obj in data[:1] if k not in obj]
        if missing:
            raise TransformError(f"step {index}: unknown field {missing[0]!r}")
        return [{k: obj[k] for k in keys if k in obj} for obj in data]
    if op == "rename":
        mapping = dict(step.get("mapping", {}))
        out = []
        for obj in data:
            new = {}
            for k, v in obj.items():
                new[mapping.get(k, k)] = v
            out.append(new)
        return out
    if op == "filter":
        expr = Expr(str(step.get("expr", "")))
        return [obj for obj in data if expr.evaluate(obj)]
    if op == "flatten":
        field = step.get("key")
        out = []
        for obj in data:
            if field not in obj:
                raise TransformError(f"step {index}: unknown field {field!r}")
            values = obj[field]
            if not isinstance(values, list):
                raise TransformError(f"step {index}: field {field!r} is not a list")
            for v in values:
                new = {k: val for k, val in obj.items() if k != field}
                new[field] = v
                out.append(new)
        return out
    if op == "sort":
        field = step.get("key")
        reverse = step.get("dir", "asc") == "desc"
        try:
            return sorted(data, key=lambda o: o[field], reverse=reverse)
        except KeyError:
            raise TransformError(f"step {index}: unknown field {field!r}") from None
    if op == "limit":
        n = int(step.get("n", 0))
        if n < 0:
            raise TransformError(f"step {index}: limit must be >= 0")
        return data[:n]
    if op == "compute":
        field = step.get("key")
        expr = Expr(str(step.get("expr", "")))
        out = []
        for obj in data:
            new = dict(obj)
            new[field] = expr.evaluate(obj)
            out.append(new)
        return out
    raise TransformError(f"step {index}: unknown op {op!r}")
