"""One analysis session: goal, corpus, search tree, pipeline, evaluations.

Sessions are event-sourced: every successful mutation appends an event, and
folding the event log over the recorded fixtures reproduces the snapshot
byte-for-byte. Failed mutations roll back to the pre-call state.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .decomposer import Decomposer, best_path
from .errors import SpecValidationError
from .evaluator import Evaluator, chart_data
from .executor import Executor
from .gateway import FixtureStore, Gateway, ModelRef
from .prompts import PromptCatalog
from .scripted import ScriptedTransport
from .speclang import SearchConfig, SessionSnapshot, serialize
from .store import CorpusStore


class Session:
    def __init__(self, goal: str, documents: list[dict],
                 config: SearchConfig | None = None, gateway: Gateway | None = None,
                 catalog: PromptCatalog | None = None, directory=None,
                 dataset_ref: str = "inline", dataset_context: str = ""):
        self.goal = goal
        self.documents = [dict(d) for d in documents]
        self.config = config or SearchConfig()
        self.dataset_ref = dataset_ref
        self.dataset_context = dataset_context
        self.directory = Path(directory) if directory else None
        self.catalog = catalog or PromptCatalog.load()
        if gateway is None:
            fixtures = FixtureStore(self.directory / "fixtures.jsonl"
                                    if self.directory else None)
            gateway = Gateway(transport=ScriptedTransport(), mode="record",
                              fixtures=fixtures)
        self.gateway = gateway
        committee = [ModelRef(provider="scripted", model=name)
                     for name in self.config.committee]
        self.decomposer = Decomposer(gateway, self.catalog, committee)
        self.executor = Executor(gateway, self.catalog, committee[0])
        self.evaluator = Evaluator(gateway, self.catalog, committee[0])

        self.store = CorpusStore()
        self.store.add_documents(self.documents)
        self.tree = None
        self.pipeline = None
        self.evaluators: dict[str, dict] = {}
        self.evaluations: dict[str, dict] = {}
        self.results: dict[str, dict] = {}
        self.topics: dict | None = None
        self.events: list[dict] = []
        self.stream_events: list[dict] = []
        self.paused = False

    # -- event-sourced mutation ---------------------------------------------

    _OPS = ("start_search", "step", "run", "override_score", "delete_subtree",
            "regenerate", "add_children", "redefine_criterion", "set_strategy",
            "select_plan", "convert", "compile", "patch_task", "execute",
            "create_evaluator", "run_evaluator", "assign_topics")

    def apply(self, op: str, args: dict | None = None):
        """Run one mutation; on success append the event, on failure roll back."""
        if op not in self._OPS:
            raise SpecValidationError(f"unknown operation {op!r}", "session")
        args = args or {}
        saved = copy.deepcopy((self.tree, self.pipeline, self.store,
                               self.evaluators, self.evaluations, self.results,
                               self.topics))
        try:
            result = getattr(self, f"_op_{op}")(**args)
        except Exception:
            (self.tree, self.pipeline, self.store, self.evaluators,
             self.evaluations, self.results, self.topics) = saved
            raise
        self.events.append({"seq": len(self.events), "op": op, "args": args})
        if self.directory:
            self.save()
        return result

    def _emit(self, delta):
        self.stream_events.append({"id": len(self.stream_events),
                                   "data": delta.to_dict()})
        return delta

    # -- search operations --------------------------------------------------

    def _op_start_search(self):
        self.tree = self.decomposer.start(self.goal, self.dataset_context, self.config)
        return self.tree

    def _require_tree(self):
        if self.tree is None:
            raise SpecValidationError("search has not started", "session")
        return self.tree

    def _op_step(self):
        delta = self.decomposer.step(self._require_tree())
        return self._emit(delta)

    def _op_run(self, max_nodes=None):
        return self.decomposer.run_until_complete(self._require_tree(), max_nodes)

    def _op_override_score(self, node_id, criterion, likert, explanation=None):
        delta = self.decomposer.override_score(self._require_tree(), node_id,
                                               criterion, int(likert), explanation)
        return self._emit(delta)

    def _op_delete_subtree(self, node_id):
        return self._emit(self.decomposer.delete_subtree(self._require_tree(), node_id))

    def _op_regenerate(self, node_id):
        return self._emit(self.decomposer.regenerate_subtree(self._require_tree(), node_id))

    def _op_add_children(self, node_id, tasks):
        return self._emit(self.decomposer.add_manual_children(
            self._require_tree(), node_id, tasks))

    def _op_redefine_criterion(self, criterion, definition):
        self.decomposer.redefine_criterion(self._require_tree(), criterion, definition)
        return {"criterion": criterion}

    def _op_set_strategy(self, strategy):
        tree = self._require_tree()
        if strategy not in ("balanced", "exploit"):
            raise SpecValidationError(f"unknown strategy {strategy!r}", "session")
        tree.config.strategy = strategy
        return {"strategy": strategy}

    def _op_select_plan(self, leaf_id):
        return self.decomposer.select_plan(self._require_tree(), leaf_id)

    # -- pipeline operations ------------------------------------------------

    def _op_convert(self):
        tree = self._require_tree()
        if not tree.selected_plan:
            raise SpecValidationError("no plan selected", "session")
        plan_tasks = [tree.node(nid).task for nid in tree.selected_plan]
        self.pipeline = self.executor.convert(plan_tasks)
        return self.pipeline

    def _require_pipeline(self):
        if self.pipeline is None:
            raise SpecValidationError("no pipeline converted yet", "session")
        return self.pipeline

    def _op_compile(self, task_id):
        return self.executor.compile(self._require_pipeline(), task_id, self.store)

    def _op_patch_task(self, task_id, patch):
        """Edit a task; an executed task's outputs (and downstream) roll back."""
        pipeline = self._require_pipeline()
        task = pipeline.task(task_id)
        if task.state in ("executed", "stale"):
            for tid in self.executor.mark_stale(pipeline, task_id) + [task_id]:
                self.store.remove_task_outputs(tid)
                self.results.pop(tid, None)
            task.state = "compiled" if task.compiled else "pending"
        for field in ("description", "explanation", "kind", "depend_on"):
            if field in patch:
                setattr(task, field, patch[field])
        if "compiled" in patch:
            merged = task.compiled.to_dict() if task.compiled else {}
            merged.update(patch["compiled"])
            from .speclang import CompiledSpec

            task.compiled = CompiledSpec.from_dict(merged, f"pipeline.{task_id}.compiled")
            task.state = "compiled"
        task.validate(f"pipeline.{task_id}")
        pipeline.validate()
        return task

    def _op_execute(self, task_id):
        result = self.executor.execute(self._require_pipeline(), task_id, self.store)
        timing = result.pop("elapsed", 0.0)
        self.results[task_id] = result
        if self.directory:
            path = self.directory / "results"
            path.mkdir(parents=True, exist_ok=True)
            (path / f"{task_id}.json").write_text(
                json.dumps({**result, "elapsed": timing}, sort_keys=True,
                           ensure_ascii=False, indent=1), encoding="utf-8")
        return result

    # -- evaluation operations ----------------------------------------------

    def _op_create_evaluator(self, task_id, description):
        spec = self.evaluator.generate_evaluator(description,
                                                 self._require_pipeline().task(task_id))
        eid = f"e{len(self.evaluators) + 1}"
        self.evaluators[eid] = spec.to_dict()
        return {"id": eid, "spec": spec.to_dict()}

    def _op_run_evaluator(self, eid):
        from .speclang import EvaluatorSpec

        if eid not in self.evaluators:
            raise SpecValidationError(f"unknown evaluator {eid!r}", "session")
        spec = EvaluatorSpec.from_dict(self.evaluators[eid])
        result = self.evaluator.run_evaluator(spec, self.store, self._require_pipeline())
        self.evaluations[eid] = result
        if self.directory:
            path = self.directory / "evaluations"
            path.mkdir(parents=True, exist_ok=True)
            (path / f"{eid}.json").write_text(
                json.dumps(result, sort_keys=True, ensure_ascii=False, indent=1),
                encoding="utf-8")
        return result

    def _op_assign_topics(self, k=None):
        self.topics = self.evaluator.topic_assign(self.store, k=k)
        return self.topics

    # -- read-only views ----------------------------------------------------

    def recommend_criteria(self, task_id):
        return self.evaluator.recommend_criteria(
            self._require_pipeline().task(task_id), self.goal)

    def topic_chart(self):
        if self.topics is None:
            raise SpecValidationError("topics not assigned", "session")
        return chart_data(self.topics["topics"])

    def evaluation_chart(self, eid):
        if self.topics is None:
            raise SpecValidationError("topics not assigned", "session")
        if eid not in self.evaluations:
            raise SpecValidationError(f"evaluator {eid!r} has no results", "session")
        evaluation = self.evaluations[eid]
        # per-document categories: instances of the documents unit only
        categories = {r["id"]: r["category"] for r in evaluation["results"]}
        doc_topics = self.topics["topics"]
        doc_categories = {d: categories.get(d) for d in doc_topics}
        return chart_data(doc_topics, doc_categories,
                          category_order=evaluation["possible_scores"])

    def snapshot(self) -> SessionSnapshot:
        return SessionSnapshot(
            goal=self.goal, dataset_ref=self.dataset_ref, tree=self.tree,
            pipeline=self.pipeline, store=self.store.to_dict(),
            evaluations=dict(self.evaluations), results=dict(self.results),
            event_log=list(self.events))

    # -- persistence and replay ---------------------------------------------

    def save(self):
        d = self.directory
        d.mkdir(parents=True, exist_ok=True)
        (d / "config.json").write_text(json.dumps({
            "goal": self.goal, "dataset_ref": self.dataset_ref,
            "dataset_context": self.dataset_context,
            "config": self.config.to_dict(), "documents": self.documents,
        }, sort_keys=True, ensure_ascii=False, indent=1), encoding="utf-8")
        (d / "events.jsonl").write_text(
            "".join(json.dumps(e, sort_keys=True, ensure_ascii=False) + "\n"
                    for e in self.events), encoding="utf-8")
        if self.tree is not None:
            (d / "tree.json").write_bytes(serialize(self.tree))
        if self.pipeline is not None:
            (d / "pipeline.json").write_bytes(serialize(self.pipeline))
        (d / "snapshot.json").write_bytes(serialize(self.snapshot()))
        self.store.save(d / "store")

    @classmethod
    def replay(cls, directory) -> "Session":
        """Rebuild a session by folding its event log over recorded fixtures."""
        d = Path(directory)
        config = json.loads((d / "config.json").read_text(encoding="utf-8"))
        fixtures = FixtureStore(d / "fixtures.jsonl")
        gateway = Gateway(mode="replay", fixtures=fixtures)
        session = cls(goal=config["goal"], documents=config["documents"],
                      config=SearchConfig.from_dict(config["config"]),
                      gateway=gateway, dataset_ref=config.get("dataset_ref", "inline"),
                      dataset_context=config.get("dataset_context", ""))
        events = []
        for line in (d / "events.jsonl").read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(json.loads(line))
        for event in sorted(events, key=lambda e: e["seq"]):
            session.apply(event["op"], event["args"])
        return session


def best_plan_ids(tree) -> list[str]:
    """Best path leaf-ward, excluding the root (convenience for callers)."""
    return [nid for nid in best_path(tree) if nid != tree.root_id]
