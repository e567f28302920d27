"""Documents and analysis units: the Map/Execute/Reduce data substrate.

Units are append-only: a task adds new keys or new units, never mutates
existing ones. Re-execution rolls back a task's outputs (and downstream
tasks' outputs) before re-appending, keeping the store reproducible.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import StoreError
from .schema import SchemaExpr, parse_schema


@dataclass
class UnitInstance:
    id: str
    fields: dict = field(default_factory=dict)
    parent_refs: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"id": self.id, "fields": self.fields, "parent_refs": list(self.parent_refs)}

    @classmethod
    def from_dict(cls, d):
        return cls(id=d["id"], fields=dict(d.get("fields", {})),
                   parent_refs=list(d.get("parent_refs", [])))


@dataclass
class AnalysisUnit:
    name: str
    parent_unit: str | None = None
    instances: list[UnitInstance] = field(default_factory=list)
    # key -> {"schema": text, "task_id": producer}
    key_catalog: dict[str, dict] = field(default_factory=dict)
    created_by: str | None = None

    def keys(self):
        return list(self.key_catalog)

    def to_dict(self):
        return {"name": self.name, "parent_unit": self.parent_unit,
                "instances": [i.to_dict() for i in self.instances],
                "key_catalog": self.key_catalog, "created_by": self.created_by}

    @classmethod
    def from_dict(cls, d):
        return cls(name=d["name"], parent_unit=d.get("parent_unit"),
                   instances=[UnitInstance.from_dict(i) for i in d.get("instances", [])],
                   key_catalog=dict(d.get("key_catalog", {})),
                   created_by=d.get("created_by"))


class GroupResult:
    """One grouping-execution result: a value plus the member instance ids."""

    def __init__(self, value, member_ids, fields=None):
        self.value = value
        self.member_ids = list(member_ids)
        self.fields = fields or {}


class CorpusStore:
    def __init__(self):
        self.units: dict[str, AnalysisUnit] = {}
        self._unit_order: list[str] = []

    # -- ingestion ----------------------------------------------------------

    def load_corpus(self, source) -> AnalysisUnit:
        """Create the "documents" unit from JSON, CSV, or a directory of .txt."""
        docs = _read_documents(source)
        if not docs:
            raise StoreError("no documents in corpus source")
        return self.add_documents(docs)

    def add_documents(self, docs: list[dict]) -> AnalysisUnit:
        unit = AnalysisUnit(name="documents",
                            key_catalog={"content": {"schema": "str", "task_id": "corpus"}})
        seen = set()
        for i, d in enumerate(docs):
            content = d.get("content")
            if not content or not str(content).strip():
                continue
            doc_id = str(d.get("id") or f"d{i}")
            if doc_id in seen:
                raise StoreError(f"duplicate document id {doc_id!r}")
            seen.add(doc_id)
            unit.instances.append(UnitInstance(id=doc_id, fields={"content": str(content)}))
        if not unit.instances:
            raise StoreError("no documents with non-empty content")
        self._register(unit)
        return unit

    def _register(self, unit: AnalysisUnit):
        if unit.name in self.units:
            raise StoreError(f"unit {unit.name!r} already exists")
        self.units[unit.name] = unit
        self._unit_order.append(unit.name)

    def unit(self, name) -> AnalysisUnit:
        try:
            return self.units[name]
        except KeyError:
            raise StoreError(f"unknown unit {name!r}") from None

    # -- map ----------------------------------------------------------------

    def map(self, unit_name: str, input_keys: list[str]) -> list[dict]:
        """One object per instance, in instance order, with exactly those keys."""
        unit = self.unit(unit_name)
        for key in input_keys:
            if key not in unit.key_catalog:
                raise StoreError(f"key {key!r} not in unit {unit_name!r} "
                                 f"(available: {sorted(unit.key_catalog)})")
        out = []
        for inst in unit.instances:
            obj = {"id": inst.id}
            for key in input_keys:
                if key not in inst.fields:
                    raise StoreError(f"instance {inst.id} of {unit_name!r} missing key {key!r}")
                obj[key] = inst.fields[key]
            out.append(obj)
        return out

    # -- reduce -------------------------------------------------------------

    def reduce(self, unit_name: str, task_id: str, output_key: str, schema,
               results: list, grouping: bool = False) -> str | None:
        """Write per-object results back; create a child unit when warranted.

        results must align one-to-one with the unit's instances (None marks a
        failed instance and is stored as-is). List-valued outputs are
        flattened into a new unit named after output_key; grouping outputs
        create one child instance per distinct value with its members.
        Returns the new unit's name, if one was created.
        """
        unit = self.unit(unit_name)
        if output_key in unit.key_catalog:
            raise StoreError(f"output key {output_key!r} already exists on {unit_name!r}")
        schema = parse_schema(schema)
        if len(results) != len(unit.instances):
            raise StoreError(f"result count {len(results)} != instance count "
                             f"{len(unit.instances)} for {unit_name!r}")
        for i, value in enumerate(results):
            if value is not None and not schema.conforms(value):
                raise StoreError(
                    f"result for instance {unit.instances[i].id} violates schema "
                    f"{schema.to_text()}: {value!r}")
        unit.key_catalog[output_key] = {"schema": schema.to_text(), "task_id": task_id}
        for inst, value in zip(unit.instances, results):
            inst.fields[output_key] = value

        if grouping:
            return self._create_group_unit(unit, task_id, output_key, schema, results)
        if schema.kind == "list" and (schema.item.kind in ("scalar", "object")):
            if schema.item.kind == "scalar" and schema.item.scalar != "str":
                return None  # numeric vectors are attributes, not entities
            return self._create_flatten_unit(unit, task_id, output_key, schema, results)
        return None

    def _create_flatten_unit(self, unit, task_id, output_key, schema, results) -> str:
        new = AnalysisUnit(name=output_key, parent_unit=unit.name, created_by=task_id)
        if schema.item.kind == "scalar":
            new.key_catalog["content"] = {"schema": "str", "task_id": task_id}
        else:
            for key, sub in schema.item.fields:
                new.key_catalog[key] = {"schema": sub.to_text(), "task_id": task_id}
        counter = 0
        for inst, value in zip(unit.instances, results):
            for element in (value or []):
                fields = {"content": element} if schema.item.kind == "scalar" else dict(element)
                new.instances.append(UnitInstance(id=f"{output_key}_{counter}",
                                                  fields=fields, parent_refs=[inst.id]))
                counter += 1
        self._register(new)
        return new.name

    def _create_group_unit(self, unit, task_id, output_key, schema, results) -> str:
        new = AnalysisUnit(name=output_key, parent_unit=unit.name, created_by=task_id)
        new.key_catalog[output_key] = {"schema": schema.to_text(), "task_id": task_id}
        groups: dict = {}
        order = []
        for inst, value in zip(unit.instances, results):
            if value is None:
                continue
            key = json.dumps(value, sort_keys=True)
            if key not in groups:
                groups[key] = (value, [])
                order.append(key)
            groups[key][1].append(inst.id)
        for i, key in enumerate(order):
            value, members = groups[key]
            new.instances.append(UnitInstance(id=f"{output_key}_{i}",
                                              fields={output_key: value},
                                              parent_refs=members))
        self._register(new)
        return new.name

    def add_unit_from_objects(self, task_id: str, name: str, objects: list[dict],
                              parent_unit: str | None = None) -> str:
        """Whole-set outputs (e.g. transforms) become a fresh unit directly."""
        if not objects:
            raise StoreError(f"no objects for new unit {name!r}")
        new = AnalysisUnit(name=name, parent_unit=parent_unit, created_by=task_id)
        keys = sorted({k for obj in objects for k in obj if k not in ("id", "parent_refs")})
        for key in keys:
            new.key_catalog[key] = {"schema": _infer_schema(objects, key), "task_id": task_id}
        for i, obj in enumerate(objects):
            fields = {k: v for k, v in obj.items() if k not in ("id", "parent_refs")}
            new.instances.append(UnitInstance(
                id=str(obj.get("id", f"{name}_{i}")), fields=fields,
                parent_refs=list(obj.get("parent_refs", []))))
        self._register(new)
        return new.name

    # -- states -------------------------------------------------------------

    def keys_by_state(self) -> list[dict]:
        """Deterministic per-unit listing of available keys for key selection."""
        states = []
        for name in self._unit_order:
            unit = self.units[name]
            states.append({
                "state": name,
                "unit": name,
                "keys": [{"key": k, "schema": meta["schema"], "produced_by": meta["task_id"]}
                         for k, meta in unit.key_catalog.items()],
            })
        return states

    def render_states(self) -> str:
        lines = []
        for state in self.keys_by_state():
            lines.append(f"<state>unit: {state['unit']}")
            for key in state["keys"]:
                lines.append(f"  - key: {key['key']}  schema: {key['schema']}")
            lines.append("</state>")
        return "\n".join(lines)

    # -- rollback -----------------------------------------------------------

    def remove_task_outputs(self, task_id: str):
        """Drop every key and unit the given task produced."""
        doomed_units = [name for name, u in self.units.items() if u.created_by == task_id]
        for name in doomed_units:
            del self.units[name]
            self._unit_order.remove(name)
        for unit in self.units.values():
            doomed_keys = [k for k, meta in unit.key_catalog.items()
                           if meta["task_id"] == task_id]
            for key in doomed_keys:
                del unit.key_catalog[key]
                for inst in unit.instances:
                    inst.fields.pop(key, None)

    # -- persistence --------------------------------------------------------

    def to_dict(self):
        return {"units": {name: self.units[name].to_dict() for name in self._unit_order},
                "unit_order": list(self._unit_order)}

    @classmethod
    def from_dict(cls, d) -> "CorpusStore":
        store = cls()
        for name in d.get("unit_order", list(d.get("units", {}))):
            store._register(AnalysisUnit.from_dict(d["units"][name]))
        return store

    def save(self, directory):
        """One JSON file per unit plus an index."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in self._unit_order:
            path = directory / f"{name}.json"
            path.write_text(json.dumps(self.units[name].to_dict(), sort_keys=True,
                                       ensure_ascii=False, indent=1), encoding="utf-8")
        (directory / "index.json").write_text(
            json.dumps({"unit_order": self._unit_order}, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "CorpusStore":
        directory = Path(directory)
        index = json.loads((directory / "index.json").read_text(encoding="utf-8"))
        store = cls()
        for name in index["unit_order"]:
            data = json.loads((directory / f"{name}.json").read_text(encoding="utf-8"))
            store._register(AnalysisUnit.from_dict(data))
        return store


def _infer_schema(objects, key) -> str:
    for obj in objects:
        v = obj.get(key)
        if v is None:
            continue
        return _schema_of(v).to_text()
    return "str"


def _schema_of(value) -> SchemaExpr:
    from . import schema as s

    if isinstance(value, bool):
        return s.scalar("bool")
    if isinstance(value, int):
        return s.scalar("int")
    if isinstance(value, float):
        return s.scalar("float")
    if isinstance(value, list):
        return s.list_of(_schema_of(value[0]) if value else s.scalar("str"))
    if isinstance(value, dict):
        return s.object_of({k: _schema_of(v) for k, v in value.items()})
    return s.scalar("str")


def _read_documents(source) -> list[dict]:
    if isinstance(source, list):
        return [dict(d) for d in source]
    path = Path(source)
    if path.is_dir():
        docs = []
        for p in sorted(path.glob("*.txt")):
            docs.append({"id": p.stem, "content": p.read_text(encoding="utf-8")})
        return docs
    if not path.exists():
        raise StoreError(f"corpus source {source!r} not found")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise StoreError("no documents: source file is empty")
    if path.suffix.lower() == ".csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or "content" not in reader.fieldnames:
            raise StoreError("CSV corpus needs a 'content' column")
        return [dict(row) for row in reader]
    data = json.loads(text)
    if not isinstance(data, list):
        raise StoreError("JSON corpus must be an array of {id?, content} objects")
    return data
