"""HTTP API: lifecycle, error mapping, streaming."""
import time

import pytest
from fastapi.testclient import TestClient

from textsteer.decomposer import best_path
from textsteer.service import create_app
from textsteer.speclang import Tree


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def session_id(client, docs):
    resp = client.post("/sessions", json={"goal": "find recurring themes",
                                          "corpus": docs,
                                          "config": {"max_nodes": 14}})
    assert resp.status_code == 200
    return resp.json()["id"]


def _run_search(client, session_id):
    client.post(f"/sessions/{session_id}/search/start")
    client.post(f"/sessions/{session_id}/search/run")
    deadline = time.time() + 30
    while time.time() < deadline:
        snap = client.get(f"/sessions/{session_id}").json()
        if len(snap["tree"]["nodes"]) >= 13:
            break
        time.sleep(0.05)
    client.post(f"/sessions/{session_id}/search/pause")
    return client.get(f"/sessions/{session_id}").json()


def _build_pipeline(client, session_id):
    snap = _run_search(client, session_id)
    tree = Tree.from_dict(snap["tree"])
    leaf = best_path(tree)[-1]
    assert client.post(f"/sessions/{session_id}/tree/select_plan",
                       json={"leaf_id": leaf}).status_code == 200
    resp = client.post(f"/sessions/{session_id}/pipeline/convert")
    assert resp.status_code == 200
    return [t["id"] for t in resp.json()["tasks"]]


def test_create_session_requires_corpus(client):
    resp = client.post("/sessions", json={"goal": "g"})
    assert resp.status_code == 400
    assert "corpus" in resp.json()["error"]


def test_unknown_session_is_404(client):
    assert client.get("/sessions/ghost").status_code == 404
    assert client.post("/sessions/ghost/search/start").status_code == 404


def test_search_step_and_stepwise_complete(client, docs):
    sid = client.post("/sessions", json={"goal": "g", "corpus": docs,
                                         "config": {"max_nodes": 200, "max_depth": 1}}
                      ).json()["id"]
    client.post(f"/sessions/{sid}/search/start")
    delta = client.post(f"/sessions/{sid}/search/step").json()
    assert delta["new_nodes"]
    # depth 1 with k=2 exhausts after one expansion
    assert client.post(f"/sessions/{sid}/search/step").json() == {"complete": True}


def test_convert_before_plan_selection_is_400(client, session_id):
    _run_search(client, session_id)
    resp = client.post(f"/sessions/{session_id}/pipeline/convert")
    assert resp.status_code == 400


def test_full_pipeline_over_http(client, session_id, docs):
    tids = _build_pipeline(client, session_id)
    for tid in tids:
        assert client.post(f"/sessions/{session_id}/pipeline/{tid}/compile"
                           ).status_code == 200
    for tid in tids:
        resp = client.post(f"/sessions/{session_id}/pipeline/{tid}/execute")
        assert resp.status_code == 200
        assert resp.json()["count"] == len(docs)
        result = client.get(f"/sessions/{session_id}/pipeline/{tid}/result")
        assert result.status_code == 200
    assert client.get(f"/sessions/{session_id}/pipeline/ghost/result"
                      ).status_code == 404


def test_execute_unexecuted_dependency_conflict(client, session_id):
    snap = _run_search(client, session_id)
    tree = Tree.from_dict(snap["tree"])
    # a clustering step lowers to an embedding -> clustering chain with a dep
    leaf = next((nid for nid, n in sorted(tree.nodes.items())
                 if n.task.label in ("Topic Clustering", "Thematic Analysis")), None)
    if leaf is None:
        pytest.skip("no clustering step proposed in this tree")
    assert client.post(f"/sessions/{session_id}/tree/select_plan",
                       json={"leaf_id": leaf}).status_code == 200
    resp = client.post(f"/sessions/{session_id}/pipeline/convert")
    assert resp.status_code == 200
    tids = [t["id"] for t in resp.json()["tasks"]]
    for tid in tids:
        client.post(f"/sessions/{session_id}/pipeline/{tid}/compile")
    snap = client.get(f"/sessions/{session_id}").json()
    dependent = next(t["id"] for t in snap["pipeline"]["tasks"] if t["depend_on"])
    resp = client.post(f"/sessions/{session_id}/pipeline/{dependent}/execute")
    assert resp.status_code == 409
    assert "unexecuted" in resp.json()["error"]


def test_patch_task_endpoint(client, session_id):
    tids = _build_pipeline(client, session_id)
    resp = client.patch(f"/sessions/{session_id}/pipeline/{tids[0]}",
                        json={"description": "adjusted"})
    assert resp.status_code == 200
    assert resp.json()["description"] == "adjusted"


def test_tree_actions(client, session_id):
    snap = _run_search(client, session_id)
    tree = Tree.from_dict(snap["tree"])
    child = tree.root.children[0]
    resp = client.post(f"/sessions/{session_id}/tree/override_score",
                       json={"node_id": child, "criterion": "importance",
                             "likert": 5, "explanation": "matters"})
    assert resp.status_code == 200
    assert child in resp.json()["updated"]
    victim = tree.root.children[-1]
    resp = client.post(f"/sessions/{session_id}/tree/delete", json={"node_id": victim})
    assert resp.status_code == 200
    assert victim in resp.json()["removed"]
    assert client.post(f"/sessions/{session_id}/tree/explode", json={}).status_code == 404


def test_evaluators_and_charts(client, session_id, docs):
    tids = _build_pipeline(client, session_id)
    for tid in tids:
        client.post(f"/sessions/{session_id}/pipeline/{tid}/compile")
    for tid in tids:
        client.post(f"/sessions/{session_id}/pipeline/{tid}/execute")
    snap = client.get(f"/sessions/{session_id}").json()
    target = next((t["id"] for t in snap["pipeline"]["tasks"]
                   if t["compiled"] and t["compiled"]["tool"]["tag"] == "prompt"), None)
    if target is None:
        pytest.skip("no prompt task in the converted pipeline")
    suggestions = client.post(f"/sessions/{session_id}/evaluators",
                              json={"recommend": target})
    assert suggestions.status_code == 200 and suggestions.json()["suggestions"]
    created = client.post(f"/sessions/{session_id}/evaluators",
                          json={"task_id": target, "description": "result quality"})
    assert created.status_code == 200
    eid = created.json()["id"]
    run = client.post(f"/sessions/{session_id}/evaluators/{eid}/run")
    assert run.status_code == 200
    assert client.get(f"/sessions/{session_id}/evaluators/{eid}/results"
                      ).status_code == 200
    assert client.post(f"/sessions/{session_id}/topics", json={}).status_code == 200
    chart = client.get(f"/sessions/{session_id}/charts/topics")
    assert chart.status_code == 200
    assert sum(r["angle"] for r in chart.json()["regions"]) == pytest.approx(360.0)
    evaluation = client.get(f"/sessions/{session_id}/charts/evaluation",
                            params={"evaluator": eid})
    assert evaluation.status_code == 200
    assert all("subregions" in r for r in evaluation.json()["regions"])


def test_sse_stream_and_resume(client, session_id):
    _run_search(client, session_id)
    events = []
    with client.stream("GET", f"/sessions/{session_id}/search/stream") as resp:
        assert resp.headers["content-type"].startswith("text/event-stream")
        buffer = ""
        for chunk in resp.iter_text():
            buffer += chunk
            while "\n\n" in buffer:
                block, buffer = buffer.split("\n\n", 1)
                events.append(block)
            if len(events) >= 2:
                break
    assert events[0].startswith("id: 0\n")
    assert "event: delta" in events[0]

    # resuming with a last-event id skips already-delivered events
    with client.stream("GET", f"/sessions/{session_id}/search/stream",
                       headers={"last-event-id": "0"}) as resp:
        buffer = ""
        first = None
        for chunk in resp.iter_text():
            buffer += chunk
            if "\n\n" in buffer:
                first = buffer.split("\n\n", 1)[0]
                break
    assert first is not None and first.startswith("id: 1\n")
