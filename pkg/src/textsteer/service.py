"""HTTP API over sessions: search streaming, tree edits, pipeline, evaluators.

One lock per session serializes mutations; reads and the event stream are
concurrent. Streaming uses server-sent events with id-based resume.
"""
from __future__ import annotations

import json
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import (
    CompileError, EvaluationError, ExecutionError, FixtureMissError, GatewayError,
    SearchComplete, SpecValidationError, StoreError, TextsteerError,
)
from .session import Session
from .speclang import SearchConfig
from .store import _read_documents

TREE_ACTIONS = {
    "override_score", "delete", "regenerate", "add_children",
    "redefine_criterion", "select_plan", "set_strategy",
}


class SessionHandle:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.runner: threading.Thread | None = None


def _status_for(exc: Exception) -> int:
    if isinstance(exc, FixtureMissError):
        return 409
    if isinstance(exc, GatewayError):
        return 502
    if isinstance(exc, (ExecutionError, EvaluationError)):
        msg = str(exc)
        if "stale" in msg or "unexecuted" in msg or "not executed" in msg:
            return 409
        return 400
    if isinstance(exc, SpecValidationError) and str(exc.rule).startswith("unknown"):
        return 404
    if isinstance(exc, (SpecValidationError, CompileError, StoreError, TextsteerError)):
        return 400
    return 500


def create_app(session_root=None) -> FastAPI:
    app = FastAPI(title="textsteer")
    sessions: dict[str, SessionHandle] = {}

    def handle(session_id) -> SessionHandle:
        if session_id not in sessions:
            raise SpecValidationError(f"unknown session {session_id!r}", "service")
        return sessions[session_id]

    @app.exception_handler(TextsteerError)
    async def on_error(request, exc):  # noqa: ARG001
        return JSONResponse(status_code=_status_for(exc), content={"error": str(exc)})

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions")
    async def create_session(body: dict):
        goal = body.get("goal", "")
        if "corpus" in body:
            documents = [dict(d) for d in body["corpus"]]
            dataset_ref = "inline"
        elif "corpus_path" in body:
            documents = _read_documents(body["corpus_path"])
            dataset_ref = str(body["corpus_path"])
        else:
            raise SpecValidationError("corpus or corpus_path required", "service")
        config = SearchConfig.from_dict(body.get("config", {}))
        session_id = uuid.uuid4().hex[:12]
        directory = None
        if session_root is not None:
            directory = f"{session_root}/{session_id}"
        session = Session(goal=goal, documents=documents, config=config,
                          directory=directory, dataset_ref=dataset_ref,
                          dataset_context=body.get("dataset_context", ""))
        sessions[session_id] = SessionHandle(session)
        return {"id": session_id}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        h = handle(session_id)
        return json.loads(bytes(_snapshot_bytes(h)))

    def _snapshot_bytes(h):
        from .speclang import serialize

        with h.lock:
            return serialize(h.session.snapshot())

    # -- search -------------------------------------------------------------

    @app.post("/sessions/{session_id}/search/start")
    async def search_start(session_id: str):
        h = handle(session_id)
        with h.lock:
            tree = h.session.apply("start_search")
        return {"root_id": tree.root_id}

    @app.post("/sessions/{session_id}/search/step")
    async def search_step(session_id: str):
        h = handle(session_id)
        with h.lock:
            try:
                delta = h.session.apply("step")
            except SearchComplete:
                return {"complete": True}
        return delta.to_dict()

    @app.post("/sessions/{session_id}/search/run")
    async def search_run(session_id: str):
        h = handle(session_id)
        h.session.paused = False

        def loop():
            while not h.session.paused:
                with h.lock:
                    if h.session.tree is not None and \
                            len(h.session.tree.nodes) >= h.session.config.max_nodes:
                        break
                    try:
                        h.session.apply("step")
                    except (SearchComplete, TextsteerError):
                        break

        if h.runner is None or not h.runner.is_alive():
            h.runner = threading.Thread(target=loop, daemon=True)
            h.runner.start()
        return {"running": True}

    @app.post("/sessions/{session_id}/search/pause")
    async def search_pause(session_id: str):
        h = handle(session_id)
        h.session.paused = True
        if h.runner is not None:
            h.runner.join(timeout=30)
        return {"paused": True}

    @app.get("/sessions/{session_id}/search/stream")
    async def search_stream(session_id: str, request: Request):
        h = handle(session_id)
        last = request.headers.get("last-event-id",
                                   request.query_params.get("last_event_id", ""))
        start = int(last) + 1 if last.isdigit() else 0

        async def events():
            import asyncio

            cursor = start
            idle = 0.0
            while idle < 30.0:
                pending = h.session.stream_events[cursor:]
                if pending:
                    idle = 0.0
                    for event in pending:
                        payload = json.dumps(event["data"], sort_keys=True)
                        yield f"id: {event['id']}\nevent: delta\ndata: {payload}\n\n"
                        cursor = event["id"] + 1
                else:
                    await asyncio.sleep(0.05)
                    idle += 0.05
                if await request.is_disconnected():
                    return

        return StreamingResponse(events(), media_type="text/event-stream")

    # -- tree edits ---------------------------------------------------------

    @app.post("/sessions/{session_id}/tree/{action}")
    async def tree_edit(session_id: str, action: str, body: dict):
        if action not in TREE_ACTIONS:
            raise SpecValidationError(f"unknown tree action {action!r}", "service")
        op = "delete_subtree" if action == "delete" else action
        h = handle(session_id)
        with h.lock:
            result = h.session.apply(op, body)
        if hasattr(result, "to_dict"):
            return result.to_dict()
        return result

    # -- pipeline -----------------------------------------------------------

    @app.post("/sessions/{session_id}/pipeline/convert")
    async def pipeline_convert(session_id: str):
        h = handle(session_id)
        with h.lock:
            pipeline = h.session.apply("convert")
        return pipeline.to_dict()

    @app.post("/sessions/{session_id}/pipeline/{task_id}/compile")
    async def pipeline_compile(session_id: str, task_id: str):
        h = handle(session_id)
        with h.lock:
            spec = h.session.apply("compile", {"task_id": task_id})
        return spec.to_dict()

    @app.patch("/sessions/{session_id}/pipeline/{task_id}")
    async def pipeline_patch(session_id: str, task_id: str, body: dict):
        h = handle(session_id)
        with h.lock:
            task = h.session.apply("patch_task", {"task_id": task_id, "patch": body})
        return task.to_dict()

    @app.post("/sessions/{session_id}/pipeline/{task_id}/execute")
    async def pipeline_execute(session_id: str, task_id: str):
        h = handle(session_id)
        with h.lock:
            return h.session.apply("execute", {"task_id": task_id})

    @app.get("/sessions/{session_id}/pipeline/{task_id}/result")
    async def pipeline_result(session_id: str, task_id: str):
        h = handle(session_id)
        if task_id not in h.session.results:
            raise SpecValidationError(f"unknown result for task {task_id!r}", "service")
        return h.session.results[task_id]

    # -- evaluators ---------------------------------------------------------

    @app.post("/sessions/{session_id}/evaluators")
    async def evaluators_create(session_id: str, body: dict):
        h = handle(session_id)
        if "recommend" in body:
            with h.lock:
                return {"suggestions": h.session.recommend_criteria(body["recommend"])}
        with h.lock:
            return h.session.apply("create_evaluator",
                                   {"task_id": body["task_id"],
                                    "description": body["description"]})

    @app.post("/sessions/{session_id}/evaluators/{eid}/run")
    async def evaluators_run(session_id: str, eid: str):
        h = handle(session_id)
        with h.lock:
            return h.session.apply("run_evaluator", {"eid": eid})

    @app.get("/sessions/{session_id}/evaluators/{eid}/results")
    async def evaluators_results(session_id: str, eid: str):
        h = handle(session_id)
        if eid not in h.session.evaluations:
            raise SpecValidationError(f"unknown evaluation {eid!r}", "service")
        return h.session.evaluations[eid]

    # -- charts -------------------------------------------------------------

    @app.post("/sessions/{session_id}/topics")
    async def assign_topics(session_id: str, body: dict | None = None):
        h = handle(session_id)
        with h.lock:
            return h.session.apply("assign_topics", body or {})

    @app.get("/sessions/{session_id}/charts/topics")
    async def chart_topics(session_id: str):
        h = handle(session_id)
        with h.lock:
            return h.session.topic_chart()

    @app.get("/sessions/{session_id}/charts/evaluation")
    async def chart_evaluation(session_id: str, evaluator: str):
        h = handle(session_id)
        with h.lock:
            return h.session.evaluation_chart(evaluator)

    return app
