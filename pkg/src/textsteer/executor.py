"""Plan conversion, task compilation, and pipeline execution.

convert() turns a selected sequence of semantic tasks into a pipeline of
primitive tasks, one semantic task at a time. compile() resolves the inputs,
tool configuration, and output schema for one primitive task. execute() runs
the compiled task over the store as map -> tool -> reduce, with bounded
per-instance failure tolerance and stale-marking of downstream tasks.
"""
from __future__ import annotations

import json
import time

from .errors import CompileError, ExecutionError, ExtractionError
from .gateway import CompletionRequest, extract_json
from .registry import KIND_TOOL, REGISTRY, render_registry
from .schema import parse_schema
from .speclang import CompiledSpec, Pipeline, PrimitiveTask, ToolConfig
from .tools import (
    clustering_run, dimreduction_run, embedding_run, segmentation_run, transform_run,
)

FAILURE_TOLERANCE = 0.10
SAMPLE_CHARS = 500


def ask_json(gateway, model, system, user, tag, temperature=0.0, max_tokens=2048):
    """One completion with a single strict re-ask on malformed output."""
    req = CompletionRequest(model=model, system=system, user=user,
                            temperature=temperature, max_tokens=max_tokens, tag=tag)
    resp = gateway.complete(req)
    try:
        return extract_json(resp.text)
    except ExtractionError:
        retry = CompletionRequest(
            model=model,
            system=system + "\n\nYour previous reply was not valid JSON. "
                            "Reply with ONLY the JSON object.",
            user=user, temperature=temperature, max_tokens=max_tokens,
            tag=tag + "/retry")
        return extract_json(gateway.complete(retry).text)


def split_output_schema(output_schema, fallback_key):
    """Resolve (output_key, value schema text) from a tool's output_schema.

    Tool prompts answer with a one-key object schema like
    "{ 'cluster': 'int'}"; a bare type falls back to the supplied key name.
    """
    expr = parse_schema(output_schema)
    if expr.kind == "object" and len(expr.fields) == 1:
        key, sub = expr.fields[0]
        return key, sub.to_text()
    return fallback_key, expr.to_text()


class Executor:
    def __init__(self, gateway, catalog, model, failure_tolerance=FAILURE_TOLERANCE):
        self.gateway = gateway
        self.catalog = catalog
        self.model = model
        self.failure_tolerance = failure_tolerance

    # -- conversion ---------------------------------------------------------

    def convert(self, plan_tasks, pipeline: Pipeline | None = None) -> Pipeline:
        """Lower semantic tasks to primitive tasks, one semantic task at a time."""
        pipeline = pipeline if pipeline is not None else Pipeline()
        for i, semantic in enumerate(plan_tasks):
            if semantic.label.upper() == "END":
                continue
            next_task = None
            for later in plan_tasks[i + 1:]:
                if later.label.upper() != "END":
                    next_task = later
                    break
            self._convert_one(pipeline, semantic, next_task)
        pipeline.validate()
        return pipeline

    def _convert_one(self, pipeline, semantic, next_task):
        previous = [{"id": t.id, "label": t.kind, "description": t.description,
                     "depend_on": t.depend_on} for t in pipeline.tasks]
        system, user = self.catalog.render(
            "convert",
            primitive_task_defs=render_registry(),
            supported_labels=", ".join(sorted(REGISTRY)),
            previous_primitives=json.dumps(previous, indent=1) if previous else "(none)",
            semantic_task=f"[{semantic.id}] {semantic.label}: {semantic.description}\n"
                          f"Why: {semantic.explanation}",
            next_semantic_task=(f"{next_task.label}: {next_task.description}"
                                if next_task else "(none; this is the last task)"))
        tag = f"convert/{semantic.id}"
        data = ask_json(self.gateway, self.model, system, user, tag)
        tasks = self._parse_primitives(data)
        if tasks is None:
            retry_system = (system + "\n\nYour previous reply used a label outside the "
                                     "primitive task list. Use ONLY the exact labels given.")
            data = ask_json(self.gateway, self.model, retry_system, user, tag + "/kinds")
            tasks = self._parse_primitives(data)
            if tasks is None:
                raise CompileError(f"conversion for {semantic.id} produced an unknown task kind")
        self._append_primitives(pipeline, semantic, tasks)

    @staticmethod
    def _parse_primitives(data):
        """Raw primitive-task dicts, or None when any kind is unregistered."""
        if not isinstance(data, dict) or not isinstance(data.get("primitive_tasks"), list):
            raise CompileError("malformed conversion response")
        tasks = data["primitive_tasks"]
        for raw in tasks:
            if raw.get("label") not in REGISTRY:
                return None
        return tasks

    def _append_primitives(self, pipeline, semantic, raw_tasks):
        existing = {t.id for t in pipeline.tasks}
        id_map = {}
        for raw in raw_tasks:
            model_id = str(raw.get("id", ""))
            if model_id in existing:
                # the model re-listed an already generated task: reuse it
                id_map[model_id] = model_id
                continue
            fresh = pipeline.fresh_id()
            id_map[model_id] = fresh
            deps = []
            for dep in raw.get("depend_on", []):
                dep = str(dep)
                if dep in id_map:
                    deps.append(id_map[dep])
                elif dep in existing:
                    deps.append(dep)
                else:
                    raise CompileError(
                        f"conversion for {semantic.id}: dependency {dep!r} unresolved")
            pipeline.tasks.append(PrimitiveTask(
                id=fresh, kind=raw["label"], solves=semantic.id,
                depend_on=deps, description=str(raw.get("description", "")),
                explanation=str(raw.get("explanation", ""))))

    # -- compilation --------------------------------------------------------

    def compile(self, pipeline: Pipeline, task_id: str, store) -> CompiledSpec:
        task = pipeline.task(task_id)
        for dep in task.depend_on:
            if pipeline.task(dep).state not in ("compiled", "executed"):
                raise CompileError(f"dependency {dep} of {task_id} is not compiled yet")
        states = self._planned_states(pipeline, store)
        input_keys, unit_name = self._select_input_keys(task, states)
        entry = REGISTRY[task.kind]
        if entry.input_role == "Vector Representation":
            if not any(parse_schema(k["schema"]).kind == "list"
                       and parse_schema(k["schema"]).item.kind == "scalar"
                       and parse_schema(k["schema"]).item.scalar == "float"
                       for k in input_keys):
                raise CompileError(
                    f"task {task_id} ({task.kind}): selected inputs carry no "
                    "Vector Representation (no list[float] key); run an embedding step first")
        catalog = dict(states)[unit_name]
        tool, output_key, output_schema = self._generate_tool(
            task, store, unit_name, catalog, input_keys)
        if output_key in catalog:
            raise CompileError(
                f"task {task_id}: output key {output_key!r} already exists on {unit_name!r}")
        spec = CompiledSpec(input_keys=input_keys, output_key=output_key,
                            output_schema=output_schema, tool=tool, target_unit=unit_name)
        spec.validate(f"pipeline.{task_id}.compiled")
        task.compiled = spec
        task.state = "compiled"
        return spec

    @staticmethod
    def _planned_states(pipeline, store):
        """Ordered (unit, {key: schema}) view: store keys plus the outputs
        promised by compiled-but-unexecuted tasks, including the units those
        outputs will create."""
        states = [(name, {k: meta["schema"]
                          for k, meta in store.units[name].key_catalog.items()})
                  for name in store._unit_order]

        def catalog_of(unit_name):
            for name, catalog in states:
                if name == unit_name:
                    return catalog
            return None

        for tid in pipeline.topological_order():
            t = pipeline.task(tid)
            if t.compiled is None or t.state != "compiled":
                continue
            spec = t.compiled
            target = catalog_of(spec.target_unit)
            if target is None or spec.output_key in target:
                continue
            target[spec.output_key] = spec.output_schema
            expr = parse_schema(spec.output_schema)
            if catalog_of(spec.output_key) is not None:
                continue
            if spec.tool.tag == "clustering":
                states.append((spec.output_key, {spec.output_key: spec.output_schema}))
            elif spec.tool.tag == "transform":
                states.append((spec.output_key,
                               {k["key"]: k["schema"] for k in spec.input_keys}))
            elif expr.kind == "list" and expr.item.kind == "scalar" \
                    and expr.item.scalar == "str":
                states.append((spec.output_key, {"content": "str"}))
            elif expr.kind == "list" and expr.item.kind == "object":
                states.append((spec.output_key,
                               {k: v.to_text() for k, v in expr.item.fields}))
        return states

    @staticmethod
    def _render_states(states) -> str:
        lines = []
        for unit, catalog in states:
            lines.append(f"<state>unit: {unit}")
            for key, schema in catalog.items():
                lines.append(f"  - key: {key}  schema: {schema}")
            lines.append("</state>")
        return "\n".join(lines)

    def _select_input_keys(self, task, states):
        """Ask for the required keys; they must come from exactly one unit."""
        system, user = self.catalog.render(
            "input_keys", task_description=task.description or task.kind,
            states=self._render_states(states))
        data = ask_json(self.gateway, self.model, system, user,
                        f"compile/{task.id}/input_keys")
        raw_keys = data.get("required_keys") if isinstance(data, dict) else None
        if not raw_keys:
            raise CompileError(f"task {task.id}: no input keys selected")
        names = [str(k["key"]) for k in raw_keys]
        unit_name = catalog = None
        for name, cat in states:
            if all(key in cat for key in names):
                unit_name, catalog = name, cat
                break
        if unit_name is None:
            raise CompileError(
                f"task {task.id}: selected keys {names} do not all belong to one state")
        input_keys = []
        for raw in raw_keys:
            key = str(raw["key"])
            try:
                schema = parse_schema(raw.get("schema", catalog[key])).to_text()
            except Exception:  # noqa: BLE001 - model schema is advisory
                schema = catalog[key]
            input_keys.append({"key": key, "schema": schema, "unit": unit_name})
        return input_keys, unit_name

    def _generate_tool(self, task, store, unit_name, catalog, input_keys):
        """Kind-specific tool configuration via the matching catalog prompt."""
        tool_tag = KIND_TOOL[task.kind]
        input_schema = json.dumps({k["key"]: k["schema"] for k in input_keys}, indent=1)
        tag = f"compile/{task.id}/tool"
        if tool_tag == "prompt":
            return self._generate_prompt_tool(task, store, unit_name, catalog,
                                              input_keys, tag)
        system, user = self.catalog.render(
            tool_tag if tool_tag != "dim_reduction" else "dim_reduction",
            task_description=task.description or task.kind, input_schema=input_schema)
        data = ask_json(self.gateway, self.model, system, user, tag)
        if not isinstance(data, dict) or "output_schema" not in data:
            raise CompileError(f"task {task.id}: malformed {tool_tag} configuration")
        fallback = {"embedding": "embedding", "clustering": "cluster",
                    "dim_reduction": "reduced", "segmentation": "segments",
                    "transform": "transformed"}[tool_tag]
        output_key, output_schema = split_output_schema(data["output_schema"], fallback)
        if tool_tag == "transform":
            config = {"plan": data.get("parameters", {}).get("plan", []),
                      "output_schema": output_schema}
        elif tool_tag == "embedding":
            config = {"provider": data.get("provider", "hashed"),
                      "parameters": data.get("parameters", {}),
                      "output_schema": output_schema}
        elif tool_tag == "segmentation":
            config = {"strategy": data.get("strategy", "paragraph"),
                      "parameters": data.get("parameters", {}),
                      "output_schema": output_schema}
        else:  # clustering / dim_reduction
            config = {"algorithm": data.get("algorithm", ""),
                      "parameters": data.get("parameters", {}),
                      "output_schema": output_schema}
        return ToolConfig(tag=tool_tag, config=config), output_key, output_schema

    def _generate_prompt_tool(self, task, store, unit_name, catalog, input_keys, tag):
        existing = "\n".join(f"- {k}: {schema}" for k, schema in catalog.items())
        sample = ""
        if unit_name in store.units and store.units[unit_name].instances:
            first_key = input_keys[0]["key"]
            sample = str(store.units[unit_name].instances[0]
                         .fields.get(first_key, ""))[:SAMPLE_CHARS]
        system, user = self.catalog.render(
            "prompt_tool", existing_keys=existing,
            all_keys_str=", ".join(catalog),
            task_description=task.description or task.kind, sample_text=sample)
        data = ask_json(self.gateway, self.model, system, user, tag)
        if not isinstance(data, dict) or "prompt" not in data:
            raise CompileError(f"task {task.id}: malformed prompt-tool configuration")
        template = data["prompt"]
        fallback = _json_format_key(template.get("JSON_format", ""), default="result")
        output_key, output_schema = split_output_schema(
            data.get("output_schema", "str"), fallback)
        if output_key in catalog:
            raise CompileError(
                f"task {task.id}: generated output key {output_key!r} collides with "
                f"an existing key on {unit_name!r}")
        config = {"template": {"Context": template.get("Context", ""),
                               "Task": template.get("Task", ""),
                               "Requirements": template.get("Requirements", ""),
                               "JSON_format": template.get("JSON_format", "")},
                  "output_schema": output_schema}
        return ToolConfig(tag="prompt", config=config), output_key, output_schema

    # -- stale marking ------------------------------------------------------

    def mark_stale(self, pipeline: Pipeline, task_id: str) -> list[str]:
        """Downstream executed tasks become stale after an upstream edit."""
        stale = []
        for tid in pipeline.dependents(task_id):
            t = pipeline.task(tid)
            if t.state == "executed":
                t.state = "stale"
                stale.append(tid)
        return stale

    # -- execution ----------------------------------------------------------

    def execute(self, pipeline: Pipeline, task_id: str, store) -> dict:
        task = pipeline.task(task_id)
        if task.compiled is None:
            raise ExecutionError(f"task {task_id} is not compiled")
        # a stale task is runnable again: its outputs were already rolled back
        # when the upstream re-executed, so only its dependencies gate it
        for dep in task.depend_on:
            state = pipeline.task(dep).state
            if state == "stale":
                raise ExecutionError(f"task {task_id} has stale upstream {dep}")
            if state != "executed":
                raise ExecutionError(f"task {task_id} depends on unexecuted {dep}")
        if task.state == "executed":
            # re-execution: downstream results are invalid, roll everything back
            for tid in self.mark_stale(pipeline, task_id) + [task_id]:
                store.remove_task_outputs(tid)
        spec = task.compiled
        started = time.monotonic()
        try:
            result = self._run_tool(task, spec, store)
        except Exception:
            task.state = "failed"
            raise
        task.state = "executed"
        result.update({"task_id": task_id, "unit": spec.target_unit,
                       "output_key": spec.output_key,
                       "elapsed": time.monotonic() - started})
        return result

    def _run_tool(self, task, spec: CompiledSpec, store) -> dict:
        keys = [k["key"] for k in spec.input_keys]
        objects = store.map(spec.target_unit, keys)
        tag = spec.tool.tag
        if tag == "prompt":
            return self._run_prompt(task, spec, store, objects, keys)
        if tag == "transform":
            transformed = transform_run(spec.tool.config.get("plan", []), objects)
            name = store.add_unit_from_objects(task.id, spec.output_key, transformed,
                                               parent_unit=spec.target_unit)
            return {"count": len(transformed), "failed": 0, "new_unit": name,
                    "sample": transformed[:3]}
        if tag == "embedding":
            texts = [_as_text(obj, keys[0]) for obj in objects]
            vectors = embedding_run(spec.tool.config, texts)
            new_unit = store.reduce(spec.target_unit, task.id, spec.output_key,
                                    spec.output_schema, vectors)
            return {"count": len(vectors), "failed": 0, "new_unit": new_unit,
                    "sample": [v[:4] for v in vectors[:3]]}
        if tag == "clustering":
            vectors = [obj[keys[0]] for obj in objects]
            labels = clustering_run(spec.tool.config, vectors)
            new_unit = store.reduce(spec.target_unit, task.id, spec.output_key,
                                    spec.output_schema, labels, grouping=True)
            return {"count": len(labels), "failed": 0, "new_unit": new_unit,
                    "sample": labels[:10]}
        if tag == "dim_reduction":
            vectors = [obj[keys[0]] for obj in objects]
            reduced = dimreduction_run(spec.tool.config, vectors)
            new_unit = store.reduce(spec.target_unit, task.id, spec.output_key,
                                    spec.output_schema, reduced)
            return {"count": len(reduced), "failed": 0, "new_unit": new_unit,
                    "sample": [v[:4] for v in reduced[:3]]}
        if tag == "segmentation":
            texts = [_as_text(obj, keys[0]) for obj in objects]
            segments = segmentation_run(spec.tool.config, texts)
            new_unit = store.reduce(spec.target_unit, task.id, spec.output_key,
                                    spec.output_schema, segments)
            return {"count": len(segments), "failed": 0, "new_unit": new_unit,
                    "sample": segments[:2]}
        raise ExecutionError(f"unknown tool tag {tag!r}")

    def _run_prompt(self, task, spec, store, objects, keys) -> dict:
        """Per-object prompt execution with one re-ask and failure tolerance."""
        template = spec.tool.config["template"]
        schema = spec.parsed_output_schema()
        system = ("** Context **\n" + template["Context"]
                  + "\n\n** Task **\n" + template["Task"]
                  + "\n\n** Requirements **\n" + template["Requirements"]
                  + "\n\nReply with this JSON format. Do not include any comments.\n"
                  + str(template["JSON_format"]))
        requests = [CompletionRequest(
            model=self.model, system=system,
            user="\n".join(f"{k}: {obj[k]}" for k in keys),
            tag=f"exec/{task.id}/{obj['id']}") for obj in objects]
        responses = self.gateway.complete_batch(requests)

        results = []
        retry_slots = []
        for i, (req, resp) in enumerate(zip(requests, responses)):
            value = self._prompt_value(resp, spec.output_key, schema)
            results.append(value)
            if value is None:
                retry_slots.append((i, req))
        if retry_slots:
            retries = [CompletionRequest(
                model=req.model,
                system=req.system + "\n\nYour previous reply was malformed or violated "
                                    "the output schema. Reply with ONLY the JSON object.",
                user=req.user, tag=req.tag + "/retry") for _, req in retry_slots]
            retry_responses = self.gateway.complete_batch(retries)
            for (i, _), resp in zip(retry_slots, retry_responses):
                results[i] = self._prompt_value(resp, spec.output_key, schema)

        failed = sum(1 for v in results if v is None)
        if objects and failed / len(objects) > self.failure_tolerance:
            raise ExecutionError(
                f"task {task.id}: {failed}/{len(objects)} instances failed "
                f"(tolerance {self.failure_tolerance:.0%})")
        new_unit = store.reduce(spec.target_unit, task.id, spec.output_key,
                                spec.output_schema, results)
        return {"count": len(results), "failed": failed, "new_unit": new_unit,
                "sample": [v for v in results if v is not None][:3]}

    @staticmethod
    def _prompt_value(response, output_key, schema):
        if isinstance(response, Exception):
            return None
        try:
            parsed = extract_json(response.text)
        except ExtractionError:
            return None
        if isinstance(parsed, dict) and output_key in parsed:
            parsed = parsed[output_key]
        return parsed if schema.conforms(parsed) else None


def _json_format_key(json_format, default="result"):
    try:
        parsed = json.loads(json_format) if isinstance(json_format, str) else json_format
        if isinstance(parsed, dict) and parsed:
            return next(iter(parsed))
    except (ValueError, TypeError):
        pass
    return default


def _as_text(obj, key):
    value = obj[key]
    if not isinstance(value, str):
        raise ExecutionError(f"instance {obj['id']}: key {key!r} is not text")
    return value
