"""Event-sourced sessions: rollback, persistence, replay, charts."""
import pytest

from textsteer.decomposer import best_path, check_conservation
from textsteer.errors import SpecValidationError, TextsteerError
from textsteer.session import Session
from textsteer.speclang import SearchConfig, serialize


def _session(docs, directory=None, max_nodes=15):
    return Session(goal="find recurring themes", documents=docs,
                   config=SearchConfig(max_nodes=max_nodes), directory=directory)


def run_workflow(session):
    """Search, pick the best plan, convert, compile, execute, evaluate."""
    session.apply("start_search")
    session.apply("run")
    session.apply("select_plan", {"leaf_id": best_path(session.tree)[-1]})
    pipeline = session.apply("convert")
    for tid in pipeline.topological_order():
        session.apply("compile", {"task_id": tid})
    for tid in pipeline.topological_order():
        session.apply("execute", {"task_id": tid})
    target = next((t.id for t in pipeline.tasks
                   if t.compiled and t.compiled.tool.tag == "prompt"), None)
    if target:
        created = session.apply("create_evaluator",
                                {"task_id": target, "description": "summary length"})
        session.apply("run_evaluator", {"eid": created["id"]})
    session.apply("assign_topics")
    return session


def test_unknown_operation(docs):
    with pytest.raises(SpecValidationError, match="unknown operation"):
        _session(docs).apply("format_disk")


def test_operations_require_search_state(docs):
    s = _session(docs)
    with pytest.raises(SpecValidationError, match="search has not started"):
        s.apply("step")
    s.apply("start_search")
    with pytest.raises(SpecValidationError, match="no plan selected"):
        s.apply("convert")
    with pytest.raises(SpecValidationError, match="no pipeline"):
        s.apply("compile", {"task_id": "p1"})


def test_failed_operation_rolls_back(docs):
    s = _session(docs)
    s.apply("start_search")
    s.apply("step")
    before = serialize(s.snapshot())
    events_before = len(s.events)
    with pytest.raises(TextsteerError):
        s.apply("override_score", {"node_id": "no-such-node", "criterion": "importance",
                                   "likert": 5})
    assert serialize(s.snapshot()) == before
    assert len(s.events) == events_before


def test_events_recorded_in_order(docs):
    s = _session(docs)
    s.apply("start_search")
    s.apply("step")
    s.apply("step")
    assert [e["op"] for e in s.events] == ["start_search", "step", "step"]
    assert [e["seq"] for e in s.events] == [0, 1, 2]


def test_stream_events_emitted_for_tree_deltas(docs):
    s = _session(docs)
    s.apply("start_search")
    s.apply("step")
    assert len(s.stream_events) == 1
    event = s.stream_events[0]
    assert event["id"] == 0
    assert event["data"]["new_nodes"]


def test_set_strategy_and_validation(docs):
    s = _session(docs)
    s.apply("start_search")
    s.apply("set_strategy", {"strategy": "exploit"})
    assert s.tree.config.strategy == "exploit"
    with pytest.raises(SpecValidationError):
        s.apply("set_strategy", {"strategy": "yolo"})


def test_full_workflow_state(docs):
    s = run_workflow(_session(docs))
    assert check_conservation(s.tree, tol=1e-9) == []
    assert all(t.state == "executed" for t in s.pipeline.tasks)
    assert s.results
    assert s.topics is not None
    for result in s.results.values():
        assert "elapsed" not in result  # timing is excluded from replayable state
    chart = s.topic_chart()
    assert sum(r["angle"] for r in chart["regions"]) == pytest.approx(360.0)
    if s.evaluations:
        eid = next(iter(s.evaluations))
        chart = s.evaluation_chart(eid)
        assert all("subregions" in r for r in chart["regions"])


def test_chart_requires_topics(docs):
    s = _session(docs)
    with pytest.raises(SpecValidationError, match="topics not assigned"):
        s.topic_chart()
    with pytest.raises(SpecValidationError, match="topics not assigned"):
        s.evaluation_chart("e1")


def test_patch_task_rolls_back_outputs(docs):
    s = run_workflow(_session(docs))
    first = s.pipeline.topological_order()[0]
    downstream = s.pipeline.dependents(first)
    s.apply("patch_task", {"task_id": first,
                           "patch": {"description": "redo this differently"}})
    task = s.pipeline.task(first)
    assert task.description == "redo this differently"
    assert task.state == "compiled"
    assert first not in s.results
    for tid in downstream:
        assert s.pipeline.task(tid).state in ("stale", "compiled", "pending")
        assert tid not in s.results
    # the task chain can run again
    s.apply("execute", {"task_id": first})
    assert s.pipeline.task(first).state == "executed"


def test_save_and_replay_byte_identical(docs, tmp_path):
    d = tmp_path / "session"
    original = run_workflow(_session(docs, directory=d))
    stored = (d / "snapshot.json").read_bytes()
    assert stored == serialize(original.snapshot())

    replayed = Session.replay(d)
    assert serialize(replayed.snapshot()) == stored
    assert replayed.gateway.mode == "replay"


def test_replay_is_pure_fold(docs, tmp_path):
    """Replaying twice from the same directory gives the same bytes."""
    d = tmp_path / "session"
    run_workflow(_session(docs, directory=d))
    a = serialize(Session.replay(d).snapshot())
    b = serialize(Session.replay(d).snapshot())
    assert a == b


def test_recommend_criteria_view(docs):
    s = run_workflow(_session(docs))
    target = next(t.id for t in s.pipeline.tasks
                  if t.compiled and t.compiled.tool.tag == "prompt")
    suggestions = s.recommend_criteria(target)
    assert suggestions and len(suggestions) <= 3
