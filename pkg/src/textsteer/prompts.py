"""Loader for the editable prompt catalog.

The catalog is a JSON file of named templates with {placeholder} slots.
Filling substitutes only the provided names, so literal braces inside JSON
format examples survive untouched.
"""
from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class PromptCatalog:
    def __init__(self, entries: dict):
        self.entries = entries

    @classmethod
    def load(cls, path=None) -> "PromptCatalog":
        if path is not None:
            text = Path(path).read_text(encoding="utf-8")
        else:
            text = resources.files("textsteer").joinpath("prompt_catalog.json").read_text(
                encoding="utf-8")
        return cls(json.loads(text))

    def render(self, name: str, **values) -> tuple[str, str]:
        """Return (system, user) for a catalog entry with placeholders filled."""
        entry = self.entries[name]
        return (fill(entry.get("system", ""), **values),
                fill(entry.get("user", ""), **values))


def fill(template: str, **values) -> str:
    def sub(match):
        key = match.group(1)
        if key in values:
            return str(values[key])
        return match.group(0)

    return _PLACEHOLDER.sub(sub, template)
