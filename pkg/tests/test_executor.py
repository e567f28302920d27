"""Plan conversion, compilation, and map/tool/reduce execution."""
import json

import pytest

from textsteer.errors import CompileError, ExecutionError
from textsteer.executor import Executor, ask_json, split_output_schema
from textsteer.gateway import CompletionResponse, FixtureStore, Gateway
from textsteer.scripted import ScriptedTransport
from textsteer.speclang import Pipeline, SemanticTask
from textsteer.store import CorpusStore


@pytest.fixture
def executor(gateway, catalog, committee):
    return Executor(gateway, catalog, committee[0])


@pytest.fixture
def store(docs):
    s = CorpusStore()
    s.add_documents(docs)
    return s


def _plan(*labels):
    return [SemanticTask(id=f"s{i + 1}", label=label,
                         description=f"Perform {label.lower()} on the documents.")
            for i, label in enumerate(labels)]


def test_convert_lowers_semantic_plan(executor):
    pipeline = executor.convert(_plan("Topic Clustering", "Keyword Extraction", "END"))
    kinds = [(t.id, t.kind, t.depend_on) for t in pipeline.tasks]
    assert kinds == [("p1", "Embedding Generation", []),
                     ("p2", "Clustering Analysis", ["p1"]),
                     ("p3", "Label Generation", [])]
    assert pipeline.task("p1").solves == "s1"
    assert pipeline.task("p3").solves == "s2"
    assert all(t.state == "pending" for t in pipeline.tasks)


def test_convert_reuses_existing_embedding(executor):
    pipeline = executor.convert(_plan("Topic Clustering", "Theme Analysis"))
    embeddings = [t for t in pipeline.tasks if t.kind == "Embedding Generation"]
    assert len(embeddings) == 1
    second_clustering = pipeline.tasks[-1]
    assert second_clustering.kind == "Clustering Analysis"
    assert second_clustering.depend_on == ["p1"]


def test_append_primitives_reuse_branch(executor):
    pipeline = executor.convert(_plan("Topic Clustering"))
    n_before = len(pipeline.tasks)
    executor._append_primitives(pipeline, SemanticTask(id="s9", label="More"), [
        {"id": "p1", "label": "Embedding Generation"},
        {"id": "n1", "label": "Clustering Analysis", "depend_on": ["p1"],
         "description": "cluster again"},
    ])
    assert len(pipeline.tasks) == n_before + 1
    assert pipeline.tasks[-1].depend_on == ["p1"]


def test_append_primitives_unresolved_dependency(executor):
    pipeline = Pipeline()
    with pytest.raises(CompileError, match="unresolved"):
        executor._append_primitives(pipeline, SemanticTask(id="s1", label="X"), [
            {"id": "n1", "label": "Summarization", "depend_on": ["n9"]}])


def test_compile_chain(executor, store):
    pipeline = executor.convert(_plan("Topic Clustering", "Keyword Extraction"))
    for tid in pipeline.topological_order():
        spec = executor.compile(pipeline, tid, store)
        assert pipeline.task(tid).state == "compiled"
        assert spec.target_unit == "documents"
    assert pipeline.task("p1").compiled.tool.tag == "embedding"
    assert pipeline.task("p1").compiled.output_schema == "list[float]"
    assert pipeline.task("p2").compiled.tool.tag == "clustering"
    # the clustering input is the embedding promised by the compiled upstream
    assert pipeline.task("p2").compiled.input_keys[0]["key"] == "embedding"
    assert pipeline.task("p3").compiled.tool.tag == "prompt"


def test_compile_requires_compiled_dependencies(executor, store):
    pipeline = executor.convert(_plan("Topic Clustering"))
    with pytest.raises(CompileError, match="not compiled"):
        executor.compile(pipeline, "p2", store)


def test_compile_vector_role_needs_embedding(executor, store):
    pipeline = Pipeline()
    executor._append_primitives(pipeline, SemanticTask(id="s1", label="X"), [
        {"id": "n1", "label": "Clustering Analysis",
         "description": "Cluster the documents."}])
    with pytest.raises(CompileError, match="embedding step first"):
        executor.compile(pipeline, "p1", store)


class _CollidingTransport(ScriptedTransport):
    """A transport that ignores the avoid-these-keys instruction."""

    def _tool_config(self, request):
        data = json.loads(super()._tool_config(request))
        if "prompt" in data:
            data["prompt"]["JSON_format"] = json.dumps({"summary": "str"})
            data["output_schema"] = json.dumps({"summary": "str"})
        return json.dumps(data)


def test_compile_output_key_collision(catalog, committee, store):
    gateway = Gateway(transport=_CollidingTransport(), mode="record",
                      fixtures=FixtureStore())
    executor = Executor(gateway, catalog, committee[0])
    pipeline = Pipeline()
    for i in range(2):
        executor._append_primitives(pipeline, SemanticTask(id=f"s{i}", label="X"), [
            {"id": "n1", "label": "Summarization",
             "description": "Summarize each document."}])
    executor.compile(pipeline, "p1", store)
    with pytest.raises(CompileError, match="collides|already exists"):
        executor.compile(pipeline, "p2", store)


def _compile_all(executor, pipeline, store):
    for tid in pipeline.topological_order():
        executor.compile(pipeline, tid, store)


def test_execute_order_enforced(executor, store):
    pipeline = executor.convert(_plan("Topic Clustering"))
    _compile_all(executor, pipeline, store)
    with pytest.raises(ExecutionError, match="unexecuted"):
        executor.execute(pipeline, "p2", store)


def test_execute_full_chain(executor, store, docs):
    pipeline = executor.convert(_plan("Topic Clustering", "Keyword Extraction"))
    _compile_all(executor, pipeline, store)
    for tid in pipeline.topological_order():
        result = executor.execute(pipeline, tid, store)
        assert result["count"] == len(docs)
        assert result["failed"] == 0
        assert "elapsed" in result
    assert "embedding" in store.unit("documents").key_catalog
    clusters = store.unit("clusters")
    assert sum(len(i.parent_refs) for i in clusters.instances) == len(docs)
    assert "labels" in store.units  # flattened list[str] output


def test_reexecution_marks_downstream_stale_then_recovers(executor, store):
    pipeline = executor.convert(_plan("Topic Clustering"))
    _compile_all(executor, pipeline, store)
    executor.execute(pipeline, "p1", store)
    executor.execute(pipeline, "p2", store)

    executor.execute(pipeline, "p1", store)  # re-run the embedding
    assert pipeline.task("p2").state == "stale"
    assert "clusters" not in store.units  # downstream outputs rolled back
    executor.execute(pipeline, "p2", store)  # stale tasks run again
    assert pipeline.task("p2").state == "executed"
    assert "clusters" in store.units


def test_execute_blocks_on_stale_upstream(executor, store):
    pipeline = executor.convert(_plan("Topic Clustering", "Keyword Extraction"))
    _compile_all(executor, pipeline, store)
    for tid in pipeline.topological_order():
        executor.execute(pipeline, tid, store)
    # simulate p1 going stale (its own upstream re-ran) without re-running it
    pipeline.task("p1").state = "stale"
    store.remove_task_outputs("p1")
    store.remove_task_outputs("p2")
    with pytest.raises(ExecutionError, match="stale"):
        executor.execute(pipeline, "p2", store)


class _FlakyExec(ScriptedTransport):
    """Scripted transport whose per-object execution garbles chosen instances."""

    def __init__(self, bad_ids):
        self.bad_ids = set(bad_ids)

    def _exec(self, tag, request):
        if tag.split("/")[-1] in self.bad_ids:
            return "I cannot answer that."
        return super()._exec(tag, request)


def _flaky_executor(catalog, committee, bad_ids, tolerance):
    gateway = Gateway(transport=_FlakyExec(bad_ids), mode="record",
                      fixtures=FixtureStore())
    return Executor(gateway, catalog, committee[0], failure_tolerance=tolerance)


def test_failure_tolerance_exceeded(catalog, committee, store):
    executor = _flaky_executor(catalog, committee, {"d0", "d1"}, tolerance=0.10)
    pipeline = executor.convert(_plan("Summarization"))
    _compile_all(executor, pipeline, store)
    with pytest.raises(ExecutionError, match="instances failed"):
        executor.execute(pipeline, "p1", store)
    assert pipeline.task("p1").state == "failed"


def test_failures_within_tolerance_stored_as_none(catalog, committee, store, docs):
    executor = _flaky_executor(catalog, committee, {"d0"}, tolerance=0.5)
    pipeline = executor.convert(_plan("Summarization"))
    _compile_all(executor, pipeline, store)
    result = executor.execute(pipeline, "p1", store)
    assert result["failed"] == 1
    key = pipeline.task("p1").compiled.output_key
    values = [i.fields[key] for i in store.unit("documents").instances]
    assert values[0] is None
    assert all(v is not None for v in values[1:])


def test_split_output_schema():
    assert split_output_schema("{ 'clusters': 'int'}", "x") == ("clusters", "int")
    assert split_output_schema("list[str]", "labels") == ("labels", "list[str]")
    assert split_output_schema({"summary": "str"}, "x") == ("summary", "str")


def test_ask_json_retries_once(catalog, committee):
    calls = []

    def transport(request):
        calls.append(request.tag)
        if request.tag.endswith("/retry"):
            return CompletionResponse(text='{"ok": true}')
        return CompletionResponse(text="not json at all")

    gateway = Gateway(transport=transport, mode="record", fixtures=FixtureStore())
    data = ask_json(gateway, committee[0], "s", "u", "compile/x")
    assert data == {"ok": True}
    assert calls == ["compile/x", "compile/x/retry"]
