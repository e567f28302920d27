"""Gateway modes, fixtures, batching, and output extraction."""
import threading
import time

import pytest

from textsteer.errors import ExtractionError, FixtureMissError, GatewayError
from textsteer.gateway import (
    CompletionRequest, CompletionResponse, FixtureStore, Gateway, ModelRef,
    RetryableError, extract_json, extract_tagged,
)

MODEL = ModelRef(provider="test", model="m")


def _req(user="hello", tag="judge/x", system="sys"):
    return CompletionRequest(model=MODEL, system=system, user=user, tag=tag)


def echo_transport(request):
    return CompletionResponse(text=f"echo:{request.user}")


def test_mode_validation():
    with pytest.raises(GatewayError):
        Gateway(mode="stream")
    with pytest.raises(GatewayError):
        Gateway(mode="live")  # live without a transport


def test_record_then_replay_identical():
    fixtures = FixtureStore()
    rec = Gateway(transport=echo_transport, mode="record", fixtures=fixtures)
    first = rec.complete(_req("a"))
    rep = Gateway(mode="replay", fixtures=fixtures)
    assert rep.complete(_req("a")).text == first.text


def test_replay_miss_raises():
    g = Gateway(mode="replay", fixtures=FixtureStore())
    with pytest.raises(FixtureMissError) as err:
        g.complete(_req(tag="judge/missing"))
    assert err.value.tag == "judge/missing"


def test_fixture_cursor_ordering():
    """Identical requests replay in recorded order; the last answers surplus."""
    store = FixtureStore()
    req = _req("same")
    store.record(req, CompletionResponse(text="first"))
    store.record(req, CompletionResponse(text="second"))
    assert store.lookup(req).text == "first"
    assert store.lookup(req).text == "second"
    assert store.lookup(req).text == "second"
    store.reset_cursors()
    assert store.lookup(req).text == "first"


def test_fixture_persistence(tmp_path):
    path = tmp_path / "fixtures.jsonl"
    store = FixtureStore(path)
    store.record(_req("a"), CompletionResponse(text="ra"))
    store.record(_req("b"), CompletionResponse(text="rb"))
    reloaded = FixtureStore(path)
    assert len(reloaded) == 2
    assert reloaded.lookup(_req("b")).text == "rb"


def test_digest_covers_tag():
    a = _req("x", tag="judge/1")
    b = _req("x", tag="judge/2")
    assert a.digest() != b.digest()
    assert a.digest() == _req("x", tag="judge/1").digest()


def test_batch_preserves_order_and_isolates_failures():
    def transport(request):
        if "boom" in request.user:
            raise GatewayError("boom")
        return CompletionResponse(text=request.user)

    g = Gateway(transport=transport, mode="record", fixtures=FixtureStore(), retries=1)
    results = g.complete_batch([_req("a"), _req("boom-1"), _req("c")])
    assert results[0].text == "a"
    assert isinstance(results[1], GatewayError)
    assert results[2].text == "c"


def test_bounded_parallelism():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def transport(request):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.01)
        with lock:
            state["now"] -= 1
        return CompletionResponse(text="ok")

    g = Gateway(transport=transport, mode="record", fixtures=FixtureStore(), max_parallel=4)
    g.complete_batch([_req(f"r{i}") for i in range(32)])
    assert state["peak"] <= 4
    assert g.stats.max_in_flight <= 4


def test_retry_backoff_then_success():
    attempts = {"n": 0}
    slept = []

    def transport(request):
        attempts["n"] += 1
        if attempts["n"] < 3:
            raise RetryableError("try again")
        return CompletionResponse(text="ok")

    g = Gateway(transport=transport, mode="record", fixtures=FixtureStore(),
                retries=3, sleep=slept.append)
    assert g.complete(_req()).text == "ok"
    assert attempts["n"] == 3
    assert slept == [1.0, 2.0]


def test_retries_exhausted():
    def transport(request):
        raise RetryableError("always")

    g = Gateway(transport=transport, mode="record", fixtures=FixtureStore(),
                retries=2, sleep=lambda s: None)
    with pytest.raises(GatewayError):
        g.complete(_req())


def test_stats_by_tag_category():
    g = Gateway(transport=echo_transport, mode="record", fixtures=FixtureStore())
    for tag in ("judge/a/b", "judge/c", "expand/s1", "exec/p1/d1", ""):
        g.complete(_req(tag=tag))
    assert g.stats.calls_by_category == {"judge": 2, "expand": 1, "exec": 1, "untagged": 1}
    g.reset_stats()
    assert g.stats.calls_by_category == {}


def test_committee_fanout(gateway):
    members = [ModelRef(provider="t", model=f"j{i}") for i in range(3)]
    gateway.transport = lambda req: CompletionResponse(text=req.model.name)
    responses = gateway.committee_complete("s", "u", members, tag="judge")
    assert [r.text for r in responses] == ["t/j0", "t/j1", "t/j2"]
    with pytest.raises(GatewayError):
        gateway.committee_complete("s", "u", [])


# -- extraction --------------------------------------------------------------


def test_extract_json_plain_and_fenced():
    assert extract_json('{"a": 1}') == {"a": 1}
    assert extract_json('Sure!\n```json\n{"a": [1, 2]}\n```\nDone.') == {"a": [1, 2]}
    assert extract_json("prefix [1, 2, 3] suffix") == [1, 2, 3]


def test_extract_json_prefers_first_parsable():
    assert extract_json('broken { then {"ok": true}') == {"ok": True}


def test_extract_json_failure():
    with pytest.raises(ExtractionError):
        extract_json("no structure here")
    with pytest.raises(ExtractionError):
        extract_json(None)


def test_extract_tagged():
    text = "<REASONING>because</REASONING><RESULT>Yes</RESULT>"
    assert extract_tagged(text, "RESULT", vocabulary={"Yes", "No"}) == "Yes"
    assert extract_tagged(text, "REASONING") == "because"
    with pytest.raises(ExtractionError):
        extract_tagged(text, "RESULT", vocabulary={"Good", "Poor"})
    with pytest.raises(ExtractionError):
        extract_tagged("<RESULT>a</RESULT><RESULT>b</RESULT>", "RESULT")
    with pytest.raises(ExtractionError):
        extract_tagged("nothing", "RESULT")
