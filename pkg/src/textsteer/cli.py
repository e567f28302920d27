"""Command-line interface.

Commands operate on a session directory so a whole workflow (search,
convert, compile, run, eval, report) can be driven step by step and replayed
deterministically from its event log and fixtures.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .decomposer import best_path, path_value
from .errors import FixtureMissError, GatewayError, TextsteerError
from .evaluator import Evaluator
from .gateway import FixtureStore, Gateway, ModelRef
from .prompts import PromptCatalog
from .scripted import ScriptedTransport
from .session import Session
from .speclang import SearchConfig, parse, serialize

EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_FIXTURE_MISS = 4


def _fail(exc: Exception) -> "click.exceptions.Exit":
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, FixtureMissError):
        return SystemExit(EXIT_FIXTURE_MISS)
    if isinstance(exc, GatewayError):
        return SystemExit(EXIT_PROVIDER)
    return SystemExit(EXIT_VALIDATION)


def _continue_session(directory) -> Session:
    """Reload a session from disk, then switch the gateway to record mode so
    new operations extend the fixture file."""
    try:
        session = Session.replay(directory)
    except TextsteerError as exc:
        raise _fail(exc) from exc
    session.directory = Path(directory)
    session.gateway.mode = "record"
    session.gateway.transport = ScriptedTransport()
    session.gateway.fixtures.path = Path(directory) / "fixtures.jsonl"
    return session


@click.group()
def main():
    """Human-steered text analytics: search, compile, execute, evaluate."""


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--session-root", default=None, type=click.Path())
def serve(host, port, session_root):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(session_root), host=host, port=port)


@main.command()
@click.option("--goal", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--max-nodes", default=40, type=int)
@click.option("--strategy", default="balanced", type=click.Choice(["balanced", "exploit"]))
@click.option("--dataset-context", default="")
def search(goal, corpus_path, out_dir, max_nodes, strategy, dataset_context):
    """Start a session and run goal decomposition to completion or budget."""
    from .store import _read_documents

    try:
        documents = _read_documents(corpus_path)
        config = SearchConfig(strategy=strategy, max_nodes=max_nodes)
        session = Session(goal=goal, documents=documents, config=config,
                          directory=out_dir, dataset_ref=str(corpus_path),
                          dataset_context=dataset_context)
        session.apply("start_search")
        steps = session.apply("run", {"max_nodes": max_nodes})
    except TextsteerError as exc:
        raise _fail(exc)
    tree = session.tree
    path = best_path(tree)
    click.echo(f"search: {steps} steps, {len(tree.nodes)} nodes")
    click.echo(f"best path (value {path_value(tree, path[-1]):.3f}):")
    for nid in path:
        if nid == tree.root_id:
            continue
        click.echo(f"  [{nid}] {tree.node(nid).task.label}")


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--leaf", default=None, help="Plan leaf node id (default: best path)")
def convert(session_dir, leaf):
    """Select a plan and lower it to a primitive-task pipeline."""
    session = _continue_session(session_dir)
    try:
        if leaf is None:
            leaf = best_path(session.tree)[-1]
        session.apply("select_plan", {"leaf_id": leaf})
        pipeline = session.apply("convert")
    except TextsteerError as exc:
        raise _fail(exc)
    for task in pipeline.tasks:
        deps = f" <- {task.depend_on}" if task.depend_on else ""
        click.echo(f"[{task.id}] {task.kind}{deps}")


@main.command(name="compile")
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.argument("tasks", nargs=-1)
def compile_cmd(session_dir, tasks):
    """Compile pipeline tasks (all pending ones by default, in order)."""
    session = _continue_session(session_dir)
    try:
        pipeline = session.pipeline
        targets = list(tasks) or [tid for tid in pipeline.topological_order()
                                  if pipeline.task(tid).state == "pending"]
        for tid in targets:
            spec = session.apply("compile", {"task_id": tid})
            click.echo(f"[{tid}] {spec.tool.tag} -> {spec.output_key} "
                       f"({spec.output_schema}) on {spec.target_unit}")
    except TextsteerError as exc:
        raise _fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.argument("tasks", nargs=-1)
def run(session_dir, tasks):
    """Execute compiled tasks (all of them by default, in pipeline order)."""
    session = _continue_session(session_dir)
    try:
        pipeline = session.pipeline
        targets = list(tasks) or [tid for tid in pipeline.topological_order()
                                  if pipeline.task(tid).state == "compiled"]
        for tid in targets:
            result = session.apply("execute", {"task_id": tid})
            extra = f", new unit {result['new_unit']}" if result.get("new_unit") else ""
            click.echo(f"[{tid}] {result['count']} instances, "
                       f"{result['failed']} failed{extra}")
    except TextsteerError as exc:
        raise _fail(exc)


@main.command(name="eval")
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--task", "task_id", required=True)
@click.option("--criterion", default=None,
              help="Criterion text; omitted, prints recommendations instead")
def eval_cmd(session_dir, task_id, criterion):
    """Recommend criteria for a task, or create and run an evaluator."""
    session = _continue_session(session_dir)
    try:
        if criterion is None:
            for s in session.recommend_criteria(task_id):
                click.echo(f"- {s['name']}: {s['description']}")
            return
        created = session.apply("create_evaluator",
                                {"task_id": task_id, "description": criterion})
        result = session.apply("run_evaluator", {"eid": created["id"]})
    except TextsteerError as exc:
        raise _fail(exc)
    counts: dict = {}
    for r in result["results"]:
        counts[r["category"]] = counts.get(r["category"], 0) + 1
    click.echo(f"evaluator {created['id']} ({result['evaluator']}): {counts}")


@main.group()
def bench():
    """Benchmark harnesses."""


def _bench_evaluator() -> Evaluator:
    gateway = Gateway(transport=ScriptedTransport(), mode="record",
                      fixtures=FixtureStore())
    return Evaluator(gateway, PromptCatalog.load(),
                     ModelRef(provider="scripted", model="bench"))


@bench.command()
@click.option("--goal", required=True)
@click.option("--pipeline-a", required=True, type=click.Path(exists=True))
@click.option("--pipeline-b", required=True, type=click.Path(exists=True))
@click.option("--rounds", default=10, type=int)
@click.option("--seed", default=42, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
def arena(goal, pipeline_a, pipeline_b, rounds, seed, out_path):
    """Pairwise pipeline comparison with randomized presentation order."""
    try:
        a = parse(Path(pipeline_a).read_bytes())
        b = parse(Path(pipeline_b).read_bytes())
        tally = _bench_evaluator().arena_compare(goal, a, b, n_rounds=rounds, seed=seed)
    except TextsteerError as exc:
        raise _fail(exc)
    text = json.dumps(tally, indent=1, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@bench.command()
@click.option("--generated", required=True, type=click.Path(exists=True),
              help="JSON array of generated concept labels")
@click.option("--truth", required=True, type=click.Path(exists=True),
              help="JSON array of ground-truth topics")
def coverage(generated, truth):
    """Fraction of ground-truth topics covered by generated labels."""
    try:
        labels = json.loads(Path(generated).read_text(encoding="utf-8"))
        topics = json.loads(Path(truth).read_text(encoding="utf-8"))
        result = _bench_evaluator().concept_coverage(labels, topics)
    except TextsteerError as exc:
        raise _fail(exc)
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.argument("session_dir", type=click.Path(exists=True))
@click.option("--check/--no-check", default=True,
              help="Compare the replayed snapshot to the stored one")
def replay(session_dir, check):
    """Rebuild a session from its event log and fixtures."""
    try:
        session = Session.replay(session_dir)
    except FixtureMissError as exc:
        raise _fail(exc)
    except TextsteerError as exc:
        raise _fail(exc)
    replayed = serialize(session.snapshot())
    click.echo(f"replayed {len(session.events)} events")
    if check:
        stored = (Path(session_dir) / "snapshot.json").read_bytes()
        if stored != replayed:
            click.echo("snapshot mismatch", err=True)
            sys.exit(1)
        click.echo("snapshot matches byte-for-byte")


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--evaluator", "eid", default=None,
              help="Evaluation id to include as category bands")
def report(session_dir, out_dir, eid):
    """Render the topic radial chart, category bars, and per-document CSV."""
    from .report import generate_report

    session = _continue_session(session_dir)
    try:
        if session.topics is None:
            session.apply("assign_topics")
        if eid is None and session.evaluations:
            eid = sorted(session.evaluations)[-1]
        payload = session.evaluation_chart(eid) if eid else session.topic_chart()
        files = generate_report(payload, out_dir)
    except TextsteerError as exc:
        raise _fail(exc)
    for f in files:
        click.echo(str(f))


if __name__ == "__main__":
    main()
