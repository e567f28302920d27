"""Textual schema notation: scalars, list[T], and object maps.

The notation travels inside compiled task specs, e.g. "list[float]" or
"{ 'entities': 'list[str]' }". Parsing normalizes quoting and whitespace so
structurally equal schemas compare equal.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass

from .errors import SchemaParseError

SCALARS = ("str", "int", "float", "bool")


@dataclass(frozen=True)
class SchemaExpr:
    kind: str  # "scalar" | "list" | "object"
    scalar: str | None = None
    item: "SchemaExpr | None" = None
    fields: tuple[tuple[str, "SchemaExpr"], ...] | None = None

    def to_text(self) -> str:
        if self.kind == "scalar":
            return self.scalar
        if self.kind == "list":
            inner = self.item.to_text()
            # lists of objects render as a one-element list literal so the
            # text stays a valid Python literal and round-trips
            return f"[{inner}]" if "{" in inner else f"list[{inner}]"
        parts = []
        for k, v in self.fields:
            vt = v.to_text()
            parts.append(f"'{k}': {vt}" if vt[:1] in "{[" else f"'{k}': '{vt}'")
        return "{" + ", ".join(parts) + "}"

    def conforms(self, value) -> bool:
        """Whether a concrete value matches this schema."""
        if self.kind == "scalar":
            if self.scalar == "str":
                return isinstance(value, str)
            if self.scalar == "int":
                return isinstance(value, int) and not isinstance(value, bool)
            if self.scalar == "float":
                return isinstance(value, (int, float)) and not isinstance(value, bool)
            return isinstance(value, bool)
        if self.kind == "list":
            return isinstance(value, list) and all(self.item.conforms(v) for v in value)
        if not isinstance(value, dict):
            return False
        keys = {k for k, _ in self.fields}
        if set(value) != keys:
            return False
        return all(sub.conforms(value[k]) for k, sub in self.fields)


def scalar(name: str) -> SchemaExpr:
    return SchemaExpr("scalar", scalar=name)


def list_of(item: SchemaExpr) -> SchemaExpr:
    return SchemaExpr("list", item=item)


def object_of(fields: dict) -> SchemaExpr:
    items = tuple(sorted((k, v) for k, v in fields.items()))
    return SchemaExpr("object", fields=items)


def _parse_type_text(text: str) -> SchemaExpr:
    t = text.strip()
    if t in SCALARS:
        return scalar(t)
    if t.startswith("list[") and t.endswith("]"):
        return list_of(_parse_type_text(t[5:-1]))
    if t[:1] in "{['\"":
        return parse_schema(t)  # quoted or object notation nested in list[...]
    raise SchemaParseError(f"unknown type expression {text!r}", position=0)


def _from_literal(value) -> SchemaExpr:
    if isinstance(value, str):
        return _parse_type_text(value)
    if isinstance(value, dict):
        return object_of({str(k): _from_literal(v) for k, v in value.items()})
    if isinstance(value, list):
        # e.g. ['str'] as a sloppy variant of list[str]
        if len(value) == 1:
            return list_of(_from_literal(value[0]))
        raise SchemaParseError(f"list literal must have one element, got {value!r}")
    raise SchemaParseError(f"unsupported schema literal {value!r}")


def parse_schema(text) -> SchemaExpr:
    """Parse schema notation into a normalized SchemaExpr.

    Accepts plain type text ("str", "list[float]"), quoted/object notation
    ("{ 'entities': 'list[str]' }"), or an already-decoded dict/str.
    """
    if isinstance(text, SchemaExpr):
        return text
    if isinstance(text, (dict, list)):
        return _from_literal(text)
    if not isinstance(text, str):
        raise SchemaParseError(f"schema must be text or mapping, got {type(text).__name__}")
    t = text.strip()
    if not t:
        raise SchemaParseError("empty schema text", position=0)
    if t[0] in "{['\"":
        try:
            lit = ast.literal_eval(t)
        except (ValueError, SyntaxError) as exc:
            raise SchemaParseError(f"malformed schema literal: {exc}", position=0) from exc
        return _from_literal(lit)
    return _parse_type_text(t)


def compatible(a, b) -> bool:
    """Structural compatibility: equal after normalization."""
    return parse_schema(a) == parse_schema(b)
