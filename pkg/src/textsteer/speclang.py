"""Typed values for plans, pipelines, and snapshots, with canonical JSON I/O.

Every document is JSON with a top-level {"kind": ..., "version": 1} header.
Serialization is canonical (sorted keys, compact separators) so snapshots are
diffable and replay tests can compare bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import SpecSyntaxError, SpecValidationError, UnknownKindError
from .registry import REGISTRY
from .schema import SchemaExpr, parse_schema

VERSION = 1

CRITERIA = ("complexity", "coherence", "importance")

DEFAULT_CRITERION_DEFS = {
    "complexity": (
        "Assesses whether a task can be executed as a single step in a pipeline. "
        "During decomposition, each step should not be further divisible and must "
        "be convertible into an executable operation. This criterion promotes "
        "simplicity and facilitates efficient execution."
    ),
    "coherence": (
        "Evaluates the logical consistency between consecutive steps. A coherent "
        "sequence ensures that each task logically follows from its predecessor, "
        "avoiding contradictions, redundancies, or irrelevant operations. This "
        "maintains a meaningful analytical flow."
    ),
    "importance": (
        "Measures the contribution of each task to the overall analytical goal. "
        "Each task should be critical and essential to achieving the final outcome. "
        "Optional or peripheral tasks are excluded to maintain focus and execution "
        "efficiency."
    ),
}

TOOL_TAGS = ("prompt", "embedding", "clustering", "dim_reduction", "segmentation", "transform")
CLUSTERING_ALGORITHMS = ("kmeans", "dbscan", "agglomerative", "gaussian_mixture", "hdbscan", "bertopic")
DIMRED_ALGORITHMS = ("pca", "tsne", "umap")
SEGMENTATION_STRATEGIES = ("paragraph", "sentence", "fixed_length", "semantic")
TASK_STATES = ("pending", "compiled", "executed", "stale", "failed")


def likert_from_score(score: float) -> int:
    """Map a [0,1] score to the 1-5 display scale (half-up rounding)."""
    return max(1, min(5, int(math.floor(1 + 4 * score + 0.5))))


def score_from_likert(likert: int) -> float:
    return (likert - 1) / 4


def id_order(node_id: str):
    """Sort key for monotonic ids like "s12"; falls back to lexicographic."""
    prefix = node_id.rstrip("0123456789")
    digits = node_id[len(prefix):]
    return (prefix, int(digits) if digits else -1, node_id)


# ---------------------------------------------------------------------------
# semantic tasks and search tree


@dataclass
class SemanticTask:
    id: str
    label: str
    description: str = ""
    explanation: str = ""
    parent_ids: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"id": self.id, "label": self.label, "description": self.description,
                "explanation": self.explanation, "parent_ids": list(self.parent_ids)}

    @classmethod
    def from_dict(cls, d, path="task"):
        t = cls(id=_req(d, "id", str, path), label=_req(d, "label", str, path),
                description=d.get("description", ""), explanation=d.get("explanation", ""),
                parent_ids=list(d.get("parent_ids", [])))
        if not t.label:
            raise SpecValidationError("label is empty", path)
        return t


@dataclass
class Vote:
    judge: str
    verdict: bool | None  # None = abstained
    reasoning: str = ""

    def to_dict(self):
        return {"judge": self.judge, "verdict": self.verdict, "reasoning": self.reasoning}

    @classmethod
    def from_dict(cls, d):
        return cls(judge=d.get("judge", ""), verdict=d.get("verdict"),
                   reasoning=d.get("reasoning", ""))


@dataclass
class CriterionScore:
    criterion: str
    votes: list[Vote] = field(default_factory=list)
    score: float = 0.0
    likert: int = 1
    overridden: bool = False
    override_explanation: str | None = None
    summary: str = ""

    def validate(self, path="score"):
        if self.criterion not in CRITERIA:
            raise SpecValidationError(f"unknown criterion {self.criterion!r}", path)
        if not (0.0 <= self.score <= 1.0):
            raise SpecValidationError(f"score {self.score} outside [0,1]", path)
        if self.overridden:
            if abs(self.score - score_from_likert(self.likert)) > 1e-12:
                raise SpecValidationError("overridden score must equal (likert-1)/4", path)
        elif self.likert != likert_from_score(self.score):
            raise SpecValidationError("likert inconsistent with score", path)

    def to_dict(self):
        return {"criterion": self.criterion, "votes": [v.to_dict() for v in self.votes],
                "score": self.score, "likert": self.likert, "overridden": self.overridden,
                "override_explanation": self.override_explanation, "summary": self.summary}

    @classmethod
    def from_dict(cls, d, path="score"):
        s = cls(criterion=d.get("criterion", ""), votes=[Vote.from_dict(v) for v in d.get("votes", [])],
                score=float(d.get("score", 0.0)), likert=int(d.get("likert", 1)),
                overridden=bool(d.get("overridden", False)),
                override_explanation=d.get("override_explanation"), summary=d.get("summary", ""))
        s.validate(path)
        return s


@dataclass
class MctsNode:
    task: SemanticTask
    visits: int = 0
    value_sum: float = 0.0
    reward: float | None = None  # unset for root / unscored nodes
    scores: dict[str, CriterionScore] = field(default_factory=dict)
    children: list[str] = field(default_factory=list)
    depth: int = 0
    is_end: bool = False
    newest_generation: bool = False
    on_best_path: bool = False
    user_created: bool = False
    # reward mass injected at this node (own scoring + override adjustments);
    # subtree sums of these reproduce visits/value_sum exactly.
    own_count: int = 0
    own_mass: float = 0.0

    @property
    def id(self):
        return self.task.id

    def mean_value(self) -> float:
        if self.visits > 0:
            return self.value_sum / self.visits
        return self.reward if self.reward is not None else 0.0

    def to_dict(self):
        return {
            "task": self.task.to_dict(), "visits": self.visits, "value_sum": self.value_sum,
            "reward": self.reward, "scores": {c: s.to_dict() for c, s in sorted(self.scores.items())},
            "children": list(self.children), "depth": self.depth,
            "flags": {"is_end": self.is_end, "newest_generation": self.newest_generation,
                      "on_best_path": self.on_best_path, "user_created": self.user_created},
            "own_count": self.own_count, "own_mass": self.own_mass,
        }

    @classmethod
    def from_dict(cls, d, path="node"):
        flags = d.get("flags", {})
        return cls(
            task=SemanticTask.from_dict(d["task"], path + ".task"),
            visits=int(d.get("visits", 0)), value_sum=float(d.get("value_sum", 0.0)),
            reward=d.get("reward"),
            scores={c: CriterionScore.from_dict(s, f"{path}.scores.{c}")
                    for c, s in d.get("scores", {}).items()},
            children=list(d.get("children", [])), depth=int(d.get("depth", 0)),
            is_end=bool(flags.get("is_end", False)),
            newest_generation=bool(flags.get("newest_generation", False)),
            on_best_path=bool(flags.get("on_best_path", False)),
            user_created=bool(flags.get("user_created", False)),
            own_count=int(d.get("own_count", 0)), own_mass=float(d.get("own_mass", 0.0)),
        )


@dataclass
class SearchConfig:
    k: int = 2
    max_depth: int = 5
    strategy: str = "balanced"  # or "exploit"
    exploration_c: float = 1.0
    committee: list[str] = field(default_factory=lambda: ["judge-a", "judge-b", "judge-c"])
    epsilon_floor: float = 0.01
    max_nodes: int = 120

    def validate(self, path="config"):
        if self.k < 1:
            raise SpecValidationError("k must be >= 1", path)
        if self.max_depth < 1:
            raise SpecValidationError("max_depth must be >= 1", path)
        if self.exploration_c < 0:
            raise SpecValidationError("exploration constant must be >= 0", path)
        if self.strategy not in ("balanced", "exploit"):
            raise SpecValidationError(f"unknown strategy {self.strategy!r}", path)

    def to_dict(self):
        return {"k": self.k, "max_depth": self.max_depth, "strategy": self.strategy,
                "exploration_c": self.exploration_c, "committee": list(self.committee),
                "epsilon_floor": self.epsilon_floor, "max_nodes": self.max_nodes}

    @classmethod
    def from_dict(cls, d, path="config"):
        c = cls(k=int(d.get("k", 2)), max_depth=int(d.get("max_depth", 5)),
                strategy=d.get("strategy", "balanced"),
                exploration_c=float(d.get("exploration_c", 1.0)),
                committee=list(d.get("committee", ["judge-a", "judge-b", "judge-c"])),
                epsilon_floor=float(d.get("epsilon_floor", 0.01)),
                max_nodes=int(d.get("max_nodes", 120)))
        c.validate(path)
        return c


@dataclass
class FeedbackStore:
    """Human guidance: criterion definitions plus few-shot exemplars."""
    definitions: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CRITERION_DEFS))
    exemplars: dict[str, list[dict]] = field(default_factory=lambda: {c: [] for c in CRITERIA})

    def add_exemplar(self, criterion, context, likert, explanation):
        self.exemplars.setdefault(criterion, []).append(
            {"context": context, "likert": likert, "explanation": explanation})

    def to_dict(self):
        return {"definitions": dict(self.definitions),
                "exemplars": {c: list(v) for c, v in sorted(self.exemplars.items())}}

    @classmethod
    def from_dict(cls, d):
        fs = cls()
        fs.definitions.update(d.get("definitions", {}))
        for c, v in d.get("exemplars", {}).items():
            fs.exemplars[c] = list(v)
        return fs


@dataclass
class Tree:
    goal: str
    dataset_context: str = ""
    config: SearchConfig = field(default_factory=SearchConfig)
    nodes: dict[str, MctsNode] = field(default_factory=dict)
    root_id: str = ""
    feedback: FeedbackStore = field(default_factory=FeedbackStore)
    selected_plan: list[str] = field(default_factory=list)
    next_id: int = 0

    def node(self, node_id) -> MctsNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise SpecValidationError(f"unknown node {node_id!r}", "tree") from None

    @property
    def root(self) -> MctsNode:
        return self.node(self.root_id)

    def parent_of(self, node_id) -> str | None:
        for nid, n in self.nodes.items():
            if node_id in n.children:
                return nid
        return None

    def path_to_root(self, node_id) -> list[str]:
        """Node ids from the given node up to and including the root."""
        path = [node_id]
        cur = node_id
        while cur != self.root_id:
            cur = self.parent_of(cur)
            if cur is None:
                raise SpecValidationError(f"node {node_id!r} unreachable from root", "tree")
            path.append(cur)
        return path

    def subtree_ids(self, node_id) -> list[str]:
        out, stack = [], [node_id]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.node(nid).children))
        return out

    def fresh_id(self, prefix="s") -> str:
        self.next_id += 1
        return f"{prefix}{self.next_id}"

    def validate(self):
        if not self.goal:
            raise SpecValidationError("goal is empty", "tree")
        if self.root_id not in self.nodes:
            raise SpecValidationError("root not in nodes", "tree")
        child_of = {}
        for nid, n in self.nodes.items():
            if n.task.id != nid:
                raise SpecValidationError(f"node key {nid!r} != task id {n.task.id!r}", "tree")
            for c in n.children:
                if c not in self.nodes:
                    raise SpecValidationError(f"child {c!r} of {nid!r} missing", "tree")
                if c in child_of:
                    raise SpecValidationError(f"node {c!r} has two parents", "tree")
                child_of[c] = nid
            if n.is_end and n.children:
                raise SpecValidationError(f"END node {nid!r} has children", "tree")
            if n.depth > self.config.max_depth:
                raise SpecValidationError(f"node {nid!r} exceeds max depth", "tree")
            for pid in n.task.parent_ids:
                if pid not in self.nodes:
                    raise SpecValidationError(f"parent_id {pid!r} of {nid!r} missing", "tree")
        roots = [nid for nid in self.nodes if nid not in child_of]
        if roots != [self.root_id] and set(roots) != {self.root_id}:
            raise SpecValidationError(f"expected exactly one root, found {sorted(roots)}", "tree")

    def to_dict(self):
        return {"kind": "tree", "version": VERSION, "goal": self.goal,
                "dataset_context": self.dataset_context, "config": self.config.to_dict(),
                "root_id": self.root_id,
                "nodes": {nid: n.to_dict() for nid, n in sorted(self.nodes.items())},
                "feedback": self.feedback.to_dict(),
                "selected_plan": list(self.selected_plan), "next_id": self.next_id}

    @classmethod
    def from_dict(cls, d):
        t = cls(goal=d.get("goal", ""), dataset_context=d.get("dataset_context", ""),
                config=SearchConfig.from_dict(d.get("config", {})),
                nodes={nid: MctsNode.from_dict(nd, f"tree.nodes.{nid}")
                       for nid, nd in d.get("nodes", {}).items()},
                root_id=d.get("root_id", ""),
                feedback=FeedbackStore.from_dict(d.get("feedback", {})),
                selected_plan=list(d.get("selected_plan", [])),
                next_id=int(d.get("next_id", 0)))
        t.validate()
        return t


# ---------------------------------------------------------------------------
# primitive pipeline


@dataclass
class ToolConfig:
    tag: str
    config: dict = field(default_factory=dict)

    def validate(self, path="tool"):
        if self.tag not in TOOL_TAGS:
            raise SpecValidationError(f"unknown tool tag {self.tag!r}", path)
        if self.tag == "clustering":
            algo = self.config.get("algorithm")
            if algo not in CLUSTERING_ALGORITHMS:
                raise SpecValidationError(f"unknown clustering algorithm {algo!r}", path)
        elif self.tag == "dim_reduction":
            algo = self.config.get("algorithm")
            if algo not in DIMRED_ALGORITHMS:
                raise SpecValidationError(f"unknown dim-reduction algorithm {algo!r}", path)
        elif self.tag == "segmentation":
            strat = self.config.get("strategy")
            if strat not in SEGMENTATION_STRATEGIES:
                raise SpecValidationError(f"unknown segmentation strategy {strat!r}", path)
        elif self.tag == "transform":
            if not isinstance(self.config.get("plan", []), list):
                raise SpecValidationError("transform plan must be a list", path)

    def to_dict(self):
        return {"tag": self.tag, "config": self.config}

    @classmethod
    def from_dict(cls, d, path="tool"):
        t = cls(tag=d.get("tag", ""), config=d.get("config", {}))
        t.validate(path)
        return t


@dataclass
class CompiledSpec:
    input_keys: list[dict]  # {key, schema: text, unit}
    output_key: str
    output_schema: str
    tool: ToolConfig
    target_unit: str

    def validate(self, path="compiled"):
        if not self.input_keys:
            raise SpecValidationError("no input keys", path)
        units = {k.get("unit") for k in self.input_keys}
        if len(units) != 1:
            raise SpecValidationError(f"input keys span multiple states: {sorted(units)}", path)
        for k in self.input_keys:
            parse_schema(k["schema"])
        parse_schema(self.output_schema)
        self.tool.validate(path + ".tool")

    def parsed_output_schema(self) -> SchemaExpr:
        return parse_schema(self.output_schema)

    def to_dict(self):
        return {"input_keys": list(self.input_keys), "output_key": self.output_key,
                "output_schema": self.output_schema, "tool": self.tool.to_dict(),
                "target_unit": self.target_unit}

    @classmethod
    def from_dict(cls, d, path="compiled"):
        c = cls(input_keys=list(d.get("input_keys", [])), output_key=d.get("output_key", ""),
                output_schema=d.get("output_schema", "str"),
                tool=ToolConfig.from_dict(d.get("tool", {}), path + ".tool"),
                target_unit=d.get("target_unit", "documents"))
        c.validate(path)
        return c


@dataclass
class PrimitiveTask:
    id: str
    kind: str
    solves: str = ""
    depend_on: list[str] = field(default_factory=list)
    description: str = ""
    explanation: str = ""
    compiled: CompiledSpec | None = None
    state: str = "pending"

    def validate(self, path="task"):
        if self.kind not in REGISTRY:
            raise SpecValidationError(f"unknown kind {self.kind!r}", path)
        if self.state not in TASK_STATES:
            raise SpecValidationError(f"unknown state {self.state!r}", path)
        if self.compiled is not None:
            self.compiled.validate(path + ".compiled")

    def to_dict(self):
        return {"id": self.id, "kind": self.kind, "solves": self.solves,
                "depend_on": list(self.depend_on), "description": self.description,
                "explanation": self.explanation,
                "compiled": self.compiled.to_dict() if self.compiled else None,
                "state": self.state}

    @classmethod
    def from_dict(cls, d, path="task"):
        t = cls(id=_req(d, "id", str, path), kind=_req(d, "kind", str, path),
                solves=d.get("solves", ""), depend_on=list(d.get("depend_on", [])),
                description=d.get("description", ""), explanation=d.get("explanation", ""),
                compiled=CompiledSpec.from_dict(d["compiled"], path + ".compiled")
                if d.get("compiled") else None,
                state=d.get("state", "pending"))
        t.validate(path)
        return t


@dataclass
class Pipeline:
    tasks: list[PrimitiveTask] = field(default_factory=list)
    next_id: int = 0

    def task(self, task_id) -> PrimitiveTask:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise SpecValidationError(f"unknown primitive task {task_id!r}", "pipeline")

    def fresh_id(self) -> str:
        self.next_id += 1
        return f"p{self.next_id}"

    def dependents(self, task_id) -> list[str]:
        """Transitive downstream task ids, in pipeline order."""
        out, frontier = [], {task_id}
        changed = True
        while changed:
            changed = False
            for t in self.tasks:
                if t.id not in out and t.id not in frontier and frontier & set(t.depend_on):
                    out.append(t.id)
                    frontier.add(t.id)
                    changed = True
        return out

    def topological_order(self) -> list[str]:
        order, seen, visiting = [], set(), set()
        index = {t.id: i for i, t in enumerate(self.tasks)}

        def visit(tid):
            if tid in seen:
                return
            if tid in visiting:
                raise SpecValidationError(f"cycle at path pipeline.{tid}", "pipeline")
            visiting.add(tid)
            for dep in sorted(self.task(tid).depend_on, key=lambda d: index.get(d, 0)):
                visit(dep)
            visiting.discard(tid)
            seen.add(tid)
            order.append(tid)

        for t in self.tasks:
            visit(t.id)
        return order

    def validate(self):
        ids = [t.id for t in self.tasks]
        if len(ids) != len(set(ids)):
            raise SpecValidationError("duplicate task ids", "pipeline")
        for t in self.tasks:
            t.validate(f"pipeline.{t.id}")
            for dep in t.depend_on:
                if dep not in ids:
                    raise SpecValidationError(f"dependency {dep!r} of {t.id!r} missing", "pipeline")
        self.topological_order()  # raises on cycles

    def to_dict(self):
        return {"kind": "pipeline", "version": VERSION,
                "tasks": [t.to_dict() for t in self.tasks], "next_id": self.next_id}

    @classmethod
    def from_dict(cls, d):
        p = cls(tasks=[PrimitiveTask.from_dict(t, f"pipeline.tasks[{i}]")
                       for i, t in enumerate(d.get("tasks", []))],
                next_id=int(d.get("next_id", 0)))
        p.validate()
        return p


def validate_pipeline(pipeline: Pipeline, semantic_ids=None) -> list[str]:
    """Structural violations as data; empty list means the pipeline is valid.

    Checks the DAG property, registry closure, and input/output role
    compatibility: a "Vector Representation" input must be produced by an
    ancestor; "Text" is always available from the corpus itself; "Any" is
    trivially satisfied.
    """
    violations = []
    ids = [t.id for t in pipeline.tasks]
    if len(ids) != len(set(ids)):
        violations.append("duplicate task ids")
    known = set(ids)
    for t in pipeline.tasks:
        if t.kind not in REGISTRY:
            violations.append(f"task {t.id}: kind {t.kind!r} not in registry")
        for dep in t.depend_on:
            if dep not in known:
                violations.append(f"task {t.id}: dependency {dep!r} unresolved")
        if semantic_ids is not None and t.solves and t.solves not in semantic_ids:
            violations.append(f"task {t.id}: solves {t.solves!r} not in selected plan")
    try:
        pipeline.topological_order()
    except SpecValidationError as exc:
        violations.append(str(exc.rule))
        return violations

    # transitive ancestors per task
    ancestors = {t.id: set() for t in pipeline.tasks}
    for tid in pipeline.topological_order():
        t = pipeline.task(tid)
        for dep in t.depend_on:
            if dep in ancestors:
                ancestors[tid] |= {dep} | ancestors[dep]
    for t in pipeline.tasks:
        entry = REGISTRY.get(t.kind)
        if entry is None:
            continue
        if entry.input_role == "Vector Representation":
            produced = any(REGISTRY[pipeline.task(a).kind].output_role == "Vector Representation"
                           for a in ancestors[t.id] if pipeline.task(a).kind in REGISTRY)
            if not produced:
                violations.append(f"task {t.id}: input role Vector Representation unsatisfied")
    return violations


# ---------------------------------------------------------------------------
# evaluators


@dataclass
class EvaluatorSpec:
    name: str
    definition: str
    target_task: str
    context: str
    task: str
    possible_scores: list[str]

    def validate(self, path="evaluator"):
        if not self.possible_scores:
            raise SpecValidationError("possible_scores is empty", path)
        if len(set(self.possible_scores)) != len(self.possible_scores):
            raise SpecValidationError("possible_scores labels must be distinct", path)
        for s in self.possible_scores:
            if not s or len(s.split()) > 4:
                raise SpecValidationError(
                    f"score label {s!r} must be a single word or short noun phrase", path)

    def to_dict(self):
        return {"name": self.name, "definition": self.definition,
                "target_task": self.target_task,
                "prompt_template": {"context": self.context, "task": self.task,
                                    "possible_scores": list(self.possible_scores)}}

    @classmethod
    def from_dict(cls, d, path="evaluator"):
        tmpl = d.get("prompt_template", {})
        e = cls(name=d.get("name", ""), definition=d.get("definition", ""),
                target_task=d.get("target_task", ""),
                context=tmpl.get("context", ""), task=tmpl.get("task", ""),
                possible_scores=list(tmpl.get("possible_scores", [])))
        e.validate(path)
        return e


# ---------------------------------------------------------------------------
# snapshots


@dataclass
class SessionSnapshot:
    goal: str
    dataset_ref: str
    tree: Tree | None
    pipeline: Pipeline | None
    store: dict | None
    evaluations: dict
    results: dict
    event_log: list

    def to_dict(self):
        return {"kind": "snapshot", "version": VERSION, "goal": self.goal,
                "dataset_ref": self.dataset_ref,
                "tree": self.tree.to_dict() if self.tree else None,
                "pipeline": self.pipeline.to_dict() if self.pipeline else None,
                "store": self.store, "evaluations": self.evaluations,
                "results": self.results, "event_log": self.event_log}

    @classmethod
    def from_dict(cls, d):
        return cls(goal=d.get("goal", ""), dataset_ref=d.get("dataset_ref", ""),
                   tree=Tree.from_dict(d["tree"]) if d.get("tree") else None,
                   pipeline=Pipeline.from_dict(d["pipeline"]) if d.get("pipeline") else None,
                   store=d.get("store"), evaluations=d.get("evaluations", {}),
                   results=d.get("results", {}), event_log=list(d.get("event_log", [])))


# ---------------------------------------------------------------------------
# parse / serialize

_KINDS = {"tree": Tree, "pipeline": Pipeline, "snapshot": SessionSnapshot}


def parse(document):
    """Parse a spec document (bytes or str) into its typed value."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(f"invalid JSON at position {exc.pos}: {exc.msg}",
                              position=exc.pos) from exc
    if not isinstance(data, dict) or "kind" not in data:
        raise UnknownKindError("document has no kind discriminator")
    kind = data["kind"]
    if kind not in _KINDS:
        raise UnknownKindError(f"unknown kind {kind!r}")
    return _KINDS[kind].from_dict(data)


def serialize(value) -> bytes:
    """Canonical JSON bytes: sorted keys, compact separators, UTF-8."""
    data = value.to_dict() if hasattr(value, "to_dict") else value
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def canonical_dumps(value) -> str:
    return serialize(value).decode("utf-8")


def _req(d, key, typ, path):
    if key not in d:
        raise SpecValidationError(f"missing field {key!r}", path)
    v = d[key]
    if not isinstance(v, typ):
        raise SpecValidationError(f"field {key!r} must be {typ.__name__}", path)
    return v
