"""Categorical LLM judges over execution results, plus chart payloads and
benchmark harnesses (pairwise pipeline arena, concept coverage).

Judges only ever emit one label from a declared vocabulary; numeric outputs
are not supported. Evaluation applies to text-producing tasks only.
"""
from __future__ import annotations

import json
import math
import random

from .errors import EvaluationError, ExtractionError
from .gateway import CompletionRequest, extract_tagged
from .registry import PROMPT_KINDS
from .speclang import EvaluatorSpec, Pipeline
from .tools import clustering_run, hashed_embeddings

from .executor import ask_json

TOPIC_K_MIN = 3
TOPIC_K_MAX = 12
TOPIC_TEXT_CHARS = 400


def is_evaluable(kind: str) -> bool:
    """Only tasks with textual per-object outputs take categorical judges."""
    return kind in PROMPT_KINDS


class Evaluator:
    def __init__(self, gateway, catalog, model):
        self.gateway = gateway
        self.catalog = catalog
        self.model = model

    # -- criteria and specs -------------------------------------------------

    def recommend_criteria(self, task, goal: str) -> list[dict]:
        """Up to three {name, description} suggestions for a text task."""
        if not is_evaluable(task.kind):
            return []
        system, user = self.catalog.render(
            "recommend_criteria", task_description=task.description or task.kind,
            goal=goal)
        data = ask_json(self.gateway, self.model, system, user,
                        f"eval/recommend/{task.id}")
        suggestions = data.get("evaluator_descriptions") if isinstance(data, dict) else None
        if not isinstance(suggestions, list):
            raise EvaluationError(f"malformed criteria recommendation for {task.id}")
        return [{"name": str(s.get("name", "")), "description": str(s.get("description", ""))}
                for s in suggestions[:3]]

    def generate_evaluator(self, description: str, task) -> EvaluatorSpec:
        if not description or not description.strip():
            raise EvaluationError("criterion description is empty")
        if not is_evaluable(task.kind):
            raise EvaluationError(
                f"task {task.id} ({task.kind}) does not produce evaluable text output")
        system, user = self.catalog.render(
            "evaluator_gen", task_description=task.description or task.kind,
            criterion=description)
        data = ask_json(self.gateway, self.model, system, user,
                        f"eval/generate/{task.id}")
        raw = data.get("evaluator_specification") if isinstance(data, dict) else None
        if not isinstance(raw, dict):
            raise EvaluationError(f"malformed evaluator specification for {task.id}")
        template = raw.get("prompt_template", {})
        spec = EvaluatorSpec(
            name=str(raw.get("name", "")), definition=str(raw.get("definition", "")),
            target_task=task.id,
            context=str(template.get("Context", "")),
            task=str(template.get("Task", "")),
            possible_scores=[str(s) for s in template.get("Possible Scores", [])])
        spec.validate(f"evaluator.{task.id}")
        return spec

    # -- running ------------------------------------------------------------

    def run_evaluator(self, spec: EvaluatorSpec, store, pipeline: Pipeline) -> dict:
        """One category per unit instance; unparseable verdicts stay unscored."""
        target = pipeline.task(spec.target_task)
        if target.state != "executed" or target.compiled is None:
            raise EvaluationError(f"target task {spec.target_task} is not executed")
        unit_name = target.compiled.target_unit
        output_key = target.compiled.output_key
        objects = store.map(unit_name, [output_key])
        vocabulary = set(spec.possible_scores)
        system, _ = self.catalog.render(
            "run_evaluator", context=spec.context, task=spec.task,
            possible_scores=", ".join(spec.possible_scores))
        requests = [CompletionRequest(
            model=self.model, system=system,
            user=f"{output_key}: {obj[output_key]}",
            tag=f"eval/run/{spec.target_task}/{obj['id']}") for obj in objects]
        responses = self.gateway.complete_batch(requests)

        labels = []
        retry_slots = []
        for i, (req, resp) in enumerate(zip(requests, responses)):
            labels.append(self._category(resp, vocabulary))
            if labels[i] is None:
                retry_slots.append((i, req))
        if retry_slots:
            retries = [CompletionRequest(
                model=req.model,
                system=req.system + "\n\nYour previous reply was invalid. The <RESULT> "
                                    "block must contain exactly one of the possible scores.",
                user=req.user, tag=req.tag + "/retry") for _, req in retry_slots]
            for (i, _), resp in zip(retry_slots, self.gateway.complete_batch(retries)):
                labels[i] = self._category(resp, vocabulary)

        results = [{"id": obj["id"], "category": label}
                   for obj, label in zip(objects, labels)]
        return {"evaluator": spec.name, "target_task": spec.target_task,
                "unit": unit_name, "possible_scores": list(spec.possible_scores),
                "results": results,
                "unscored": sum(1 for r in results if r["category"] is None)}

    @staticmethod
    def _category(response, vocabulary):
        if isinstance(response, Exception):
            return None
        try:
            return extract_tagged(response.text, "RESULT", vocabulary=vocabulary)
        except ExtractionError:
            return None

    # -- topics -------------------------------------------------------------

    def topic_assign(self, store, k: int | None = None, seed: int = 42) -> dict:
        """Embed documents, cluster them, and label each cluster with a topic."""
        docs = store.map("documents", ["content"])
        if not docs:
            raise EvaluationError("no documents to assign topics to")
        if len(docs) == 1:
            label = self._topic_label([docs[0]["content"]], 0)
            return {"topics": {docs[0]["id"]: label}, "labels": [label]}
        if k is None:
            k = max(TOPIC_K_MIN, min(TOPIC_K_MAX, round(math.sqrt(len(docs) / 2))))
        k = min(k, len(docs))
        vectors = hashed_embeddings([d["content"] for d in docs])
        assignments = clustering_run(
            {"algorithm": "kmeans", "parameters": {"n_clusters": k, "seed": seed}}, vectors)
        labels = []
        for cluster in range(max(assignments) + 1):
            texts = [d["content"][:TOPIC_TEXT_CHARS]
                     for d, a in zip(docs, assignments) if a == cluster]
            labels.append(self._topic_label(texts, cluster))
        topics = {d["id"]: labels[a] for d, a in zip(docs, assignments)}
        return {"topics": topics, "labels": labels}

    def _topic_label(self, texts, cluster) -> str:
        system, user = self.catalog.render("topic_label", texts="\n---\n".join(texts))
        resp = self.gateway.complete(CompletionRequest(
            model=self.model, system=system, user=user, tag=f"eval/topic/{cluster}"))
        label = resp.text.strip().strip('"')
        return label or f"topic {cluster}"

    # -- benches ------------------------------------------------------------

    def arena_compare(self, goal: str, pipeline_a, pipeline_b, n_rounds: int = 10,
                      seed: int = 42) -> dict:
        """Pairwise pipeline judging with randomized presentation order."""
        rng = random.Random(seed)
        text_a = _pipeline_text(pipeline_a)
        text_b = _pipeline_text(pipeline_b)
        tally = {"a": 0, "b": 0, "abstain": 0}
        orders = []
        for i in range(n_rounds):
            a_first = rng.random() < 0.5
            orders.append("ab" if a_first else "ba")
            first, second = (text_a, text_b) if a_first else (text_b, text_a)
            system, user = self.catalog.render(
                "arena", goal=goal, pipeline_1=first, pipeline_2=second)
            resp = self.gateway.complete(CompletionRequest(
                model=self.model, system=system, user=user, tag=f"bench/arena/{i}"))
            try:
                pick = extract_tagged(resp.text, "RESULT",
                                      vocabulary={"Solution 1", "Solution 2"})
            except ExtractionError:
                tally["abstain"] += 1
                continue
            picked_first = pick == "Solution 1"
            tally["a" if picked_first == a_first else "b"] += 1
        return {"rounds": n_rounds, "seed": seed, "orders": orders, "tally": tally}

    def concept_coverage(self, generated_labels: list[str],
                         ground_truth_topics: list[str]) -> dict:
        """Fraction of ground-truth topics judged covered by the labels."""
        if not ground_truth_topics:
            raise EvaluationError("no ground-truth topics to check coverage against")
        if not generated_labels:
            return {"coverage": 0.0, "covered": [], "uncovered": list(ground_truth_topics)}
        covered, uncovered = [], []
        for topic in ground_truth_topics:
            system, user = self.catalog.render(
                "coverage", topic=topic, generated_labels=", ".join(generated_labels))
            resp = self.gateway.complete(CompletionRequest(
                model=self.model, system=system, user=user,
                tag=f"bench/coverage/{topic}"))
            try:
                verdict = extract_tagged(resp.text, "RESULT", vocabulary={"Yes", "No"})
            except ExtractionError:
                verdict = "No"
            (covered if verdict == "Yes" else uncovered).append(topic)
        return {"coverage": len(covered) / len(ground_truth_topics),
                "covered": covered, "uncovered": uncovered}


# ---------------------------------------------------------------------------
# chart payloads (pure functions; rendering is the consumer's job)


def chart_data(doc_topics: dict, doc_categories: dict | None = None,
               category_order: list[str] | None = None) -> dict:
    """Radial payload (topic regions, optional category subregions) + bar counts.

    Topic angles are proportional to document counts and sum to 360 degrees;
    subregion widths are proportional to category frequency within the topic
    and keep the declared category order.
    """
    if not doc_topics:
        raise EvaluationError("no topic assignment to chart")
    topic_order = []
    members: dict[str, list] = {}
    for doc_id, topic in doc_topics.items():
        if topic not in members:
            members[topic] = []
            topic_order.append(topic)
        members[topic].append(doc_id)
    total = len(doc_topics)
    if doc_categories is not None and category_order is None:
        seen = []
        for c in doc_categories.values():
            if c is not None and c not in seen:
                seen.append(c)
        category_order = seen

    regions = []
    start = 0.0
    for topic in topic_order:
        ids = members[topic]
        angle = 360.0 * len(ids) / total
        region = {"topic": topic, "count": len(ids), "start_angle": start,
                  "angle": angle, "doc_ids": list(ids)}
        if doc_categories is not None:
            bands = []
            band_order = list(category_order)
            if any(doc_categories.get(d) is None for d in ids):
                band_order = band_order + [None]
            offset = start
            for category in band_order:
                n = sum(1 for d in ids if doc_categories.get(d) == category)
                width = angle * n / len(ids)
                bands.append({"category": category, "count": n,
                              "start_angle": offset, "width": width})
                offset += width
            region["subregions"] = bands
        regions.append(region)
        start += angle

    payload = {"total": total, "regions": regions,
               "docs": [{"id": d, "topic": t,
                         "category": doc_categories.get(d) if doc_categories else None}
                        for d, t in doc_topics.items()]}
    if doc_categories is not None:
        payload["bar"] = [{"category": c,
                           "count": sum(1 for v in doc_categories.values() if v == c)}
                          for c in category_order]
    return payload


def _pipeline_text(pipeline) -> str:
    if isinstance(pipeline, Pipeline):
        steps = [{"id": t.id, "kind": t.kind, "description": t.description,
                  "depend_on": t.depend_on} for t in pipeline.tasks]
        return json.dumps(steps)
    return str(pipeline)
