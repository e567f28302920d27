"""Human-steerable MCTS over semantic-task plans with a judge-committee reward.

One iteration: select an expandable node, expand it with k candidate next
steps, score every new child with a committee of judges (no random playouts),
and backpropagate each child's reward to the root. Humans can pause between
iterations, override scores, delete or regenerate branches, and redefine the
scoring criteria; all of that feeds back into selection and future judging.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ExpansionError, ExtractionError, SearchComplete, SpecValidationError
from .gateway import CompletionRequest, extract_json, extract_tagged
from .speclang import (
    CRITERIA, CriterionScore, MctsNode, SearchConfig, SemanticTask, Tree, Vote,
    id_order, likert_from_score, score_from_likert,
)

EXPAND_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0


@dataclass
class TreeDelta:
    """What one mutation changed, for streaming to observers."""
    selected: str | None = None
    new_nodes: list[dict] = field(default_factory=list)
    updated: dict[str, dict] = field(default_factory=dict)
    removed: list[str] = field(default_factory=list)
    complete: bool = False

    def to_dict(self):
        return {"selected": self.selected, "new_nodes": self.new_nodes,
                "updated": self.updated, "removed": self.removed, "complete": self.complete}


# ---------------------------------------------------------------------------
# pure tree functions (no LLM access) - selection, values, accounting


def expandable(tree: Tree, node_id: str) -> bool:
    n = tree.node(node_id)
    return not n.is_end and n.depth < tree.config.max_depth and not n.children


def has_expandable(tree: Tree, node_id: str) -> bool:
    return any(expandable(tree, nid) for nid in tree.subtree_ids(node_id))


def uct(tree: Tree, child_id: str, parent_id: str) -> float:
    c = tree.node(child_id)
    p = tree.node(parent_id)
    if c.visits == 0 or p.visits == 0:
        return math.inf
    return (c.value_sum / c.visits
            + tree.config.exploration_c * math.sqrt(math.log(p.visits) / c.visits))


def select(tree: Tree, strategy: str | None = None) -> str:
    """Walk from the root to the first expandable node.

    balanced: descend via UCT argmax, unvisited children first (lowest id
    breaks ties). exploit: descend via mean-value argmax (unvisited children
    use their own reward). Children whose subtrees hold no expandable node
    are skipped. Raises SearchComplete when nothing is expandable.
    """
    strategy = strategy or tree.config.strategy
    cur = tree.root_id
    if not has_expandable(tree, cur):
        raise SearchComplete("no expandable node remains")
    while True:
        if expandable(tree, cur):
            return cur
        candidates = [c for c in tree.node(cur).children if has_expandable(tree, c)]
        if not candidates:
            raise SearchComplete("no expandable node remains")
        if strategy == "balanced":
            unvisited = [c for c in candidates if tree.node(c).visits == 0]
            if unvisited:
                cur = min(unvisited, key=id_order)
            else:
                cur = min(candidates, key=lambda c: (-uct(tree, c, cur), id_order(c)))
        else:  # exploit
            cur = min(candidates, key=lambda c: (-tree.node(c).mean_value(), id_order(c)))


def backpropagate(tree: Tree, child_id: str, reward: float):
    """Add one visit with the given reward to the child and every ancestor."""
    if not (0.0 <= reward <= 1.0):
        raise SpecValidationError(f"reward {reward} outside [0,1]", "backpropagate")
    child = tree.node(child_id)
    child.own_count += 1
    child.own_mass += reward
    for nid in tree.path_to_root(child_id):
        n = tree.node(nid)
        n.visits += 1
        n.value_sum += reward


def path_value(tree: Tree, leaf_id: str) -> float:
    """Geometric mean of node rewards along root->leaf, excluding the root."""
    path = [nid for nid in reversed(tree.path_to_root(leaf_id)) if nid != tree.root_id]
    if not path:
        return 0.0
    floor = tree.config.epsilon_floor
    logs = 0.0
    for nid in path:
        r = tree.node(nid).reward
        logs += math.log(max(r if r is not None else 0.0, floor))
    return math.exp(logs / len(path))


def best_path(tree: Tree) -> list[str]:
    """Root-to-leaf path with the highest value; marks on_best_path flags.

    Ties break toward the shorter path, then the lowest leaf id.
    """
    leaves = [nid for nid, n in tree.nodes.items() if not n.children and nid != tree.root_id]
    if not leaves:
        return [tree.root_id]
    best = min(leaves, key=lambda nid: (-path_value(tree, nid),
                                        tree.node(nid).depth, id_order(nid)))
    path = list(reversed(tree.path_to_root(best)))
    on_path = set(path)
    for nid, n in tree.nodes.items():
        n.on_best_path = nid in on_path
    return path


def check_conservation(tree: Tree, tol: float = 0.0) -> list[str]:
    """N/Q conservation: every node's stats equal its subtree's injected mass."""
    problems = []
    for nid in tree.nodes:
        sub = tree.subtree_ids(nid)
        n_total = sum(tree.node(s).own_count for s in sub)
        q_total = sum(tree.node(s).own_mass for s in sub)
        node = tree.node(nid)
        if node.visits != n_total:
            problems.append(f"{nid}: N={node.visits} != subtree count {n_total}")
        if abs(node.value_sum - q_total) > max(tol, 1e-9):
            problems.append(f"{nid}: Q={node.value_sum} != subtree mass {q_total}")
    return problems


# ---------------------------------------------------------------------------
# the engine


class Decomposer:
    def __init__(self, gateway, catalog, committee):
        """committee: list of ModelRef, one per judge."""
        self.gateway = gateway
        self.catalog = catalog
        self.committee = committee

    # -- lifecycle ----------------------------------------------------------

    def start(self, goal: str, dataset_context: str = "",
              config: SearchConfig | None = None) -> Tree:
        if not goal or not goal.strip():
            raise SpecValidationError("goal is empty", "start")
        tree = Tree(goal=goal, dataset_context=dataset_context,
                    config=config or SearchConfig())
        root_id = tree.fresh_id()
        root = MctsNode(task=SemanticTask(id=root_id, label="GOAL", description=goal))
        tree.nodes[root_id] = root
        tree.root_id = root_id
        return tree

    # -- expansion ----------------------------------------------------------

    def _path_text(self, tree: Tree, node_id: str) -> str:
        path = list(reversed(tree.path_to_root(node_id)))
        lines = []
        for nid in path:
            if nid == tree.root_id:
                continue
            t = tree.node(nid).task
            lines.append(f"- [{t.id}] {t.label}: {t.description}")
        return "\n".join(lines) if lines else "(none yet)"

    def expand(self, tree: Tree, node_id: str, mark_user_created=False) -> list[str]:
        node = tree.node(node_id)
        if node.is_end or node.depth >= tree.config.max_depth:
            raise ExpansionError(f"node {node_id} is not expandable")
        k = tree.config.k
        n_steps = node.depth
        system, user = self.catalog.render(
            "expand", n=k, goal=tree.goal, dataset_context=tree.dataset_context,
            n_steps=n_steps, path=self._path_text(tree, node_id))
        steps = self._ask_json(system, user, f"expand/{node_id}",
                               temperature=EXPAND_TEMPERATURE)
        if not isinstance(steps, dict) or not isinstance(steps.get("steps"), list) \
                or not steps["steps"]:
            raise ExpansionError(f"malformed expansion response for {node_id}")
        new_ids = []
        new_tasks = []
        for raw in steps["steps"][:k]:
            label = str(raw.get("label", "")).strip()
            if not label:
                raise ExpansionError("expansion produced a step without a label")
            new_tasks.append((label, str(raw.get("description", "")),
                              str(raw.get("explanation", ""))))
        # all parsing done; now mutate the tree atomically
        for prev_id, n in tree.nodes.items():
            n.newest_generation = False
        for label, description, explanation in new_tasks:
            cid = tree.fresh_id()
            task = SemanticTask(id=cid, label=label, description=description,
                                explanation=explanation,
                                parent_ids=[] if node_id == tree.root_id else [node_id])
            child = MctsNode(task=task, depth=node.depth + 1,
                             is_end=(label.upper() == "END"),
                             newest_generation=True, user_created=mark_user_created)
            tree.nodes[cid] = child
            node.children.append(cid)
            new_ids.append(cid)
        return new_ids

    def _ask_json(self, system, user, tag, temperature=0.0):
        """One completion with a single strict re-ask on malformed output."""
        req = CompletionRequest(model=self.committee[0], system=system, user=user,
                                temperature=temperature, tag=tag)
        resp = self.gateway.complete(req)
        try:
            return extract_json(resp.text)
        except ExtractionError:
            retry = CompletionRequest(
                model=self.committee[0],
                system=system + "\n\nYour previous reply was not valid JSON. "
                                "Reply with ONLY the JSON object.",
                user=user, temperature=temperature, tag=tag + "/retry")
            return extract_json(self.gateway.complete(retry).text)

    # -- scoring ------------------------------------------------------------

    def _few_shot_block(self, tree: Tree, criterion: str) -> str:
        exemplars = tree.feedback.exemplars.get(criterion, [])
        if not exemplars:
            return ""
        lines = ["\nHere are examples of human judgments on this criterion:"]
        for ex in exemplars:
            lines.append(f"- Context: {ex['context']}\n  Human score (1-5): {ex['likert']}\n"
                         f"  Explanation: {ex['explanation']}")
        return "\n".join(lines) + "\n"

    def _judge_prompt(self, tree: Tree, node_id: str, criterion: str) -> tuple[str, str]:
        node = tree.node(node_id)
        definition = tree.feedback.definitions[criterion]
        examples = self._few_shot_block(tree, criterion)
        values = {"definition": definition, "examples": examples,
                  "label": node.task.label, "description": node.task.description,
                  "goal": tree.goal}
        if criterion == "coherence":
            parent_id = tree.parent_of(node_id)
            parent = tree.node(parent_id)
            values["parent_label"] = parent.task.label if parent_id != tree.root_id else "GOAL"
            values["parent_description"] = (parent.task.description
                                            if parent_id != tree.root_id else tree.goal)
        return self.catalog.render(f"judge_{criterion}", **values)

    def score_children(self, tree: Tree, node_ids: list[str]) -> None:
        """Judge every (child, criterion, committee member), then aggregate."""
        requests = []
        slots = []  # (child_id, criterion, judge_name)
        for cid in node_ids:
            for criterion in CRITERIA:
                system, user = self._judge_prompt(tree, cid, criterion)
                for member in self.committee:
                    requests.append(CompletionRequest(
                        model=member, system=system, user=user,
                        temperature=JUDGE_TEMPERATURE,
                        tag=f"judge/{cid}/{criterion}/{member.name}"))
                    slots.append((cid, criterion, member.name))
        responses = self.gateway.complete_batch(requests)

        votes: dict[tuple[str, str], list[Vote]] = {}
        for (cid, criterion, judge), req, resp in zip(slots, requests, responses):
            vote = self._parse_vote(req, resp, judge)
            votes.setdefault((cid, criterion), []).append(vote)

        for cid in node_ids:
            child = tree.node(cid)
            for criterion in CRITERIA:
                vs = votes[(cid, criterion)]
                cast = [v for v in vs if v.verdict is not None]
                if not cast:
                    raise SpecValidationError(
                        f"all judges abstained on {criterion} for {cid}", "score_children")
                score = sum(1 for v in cast if v.verdict) / len(cast)
                summary = self._summarize(cid, criterion, [v.reasoning for v in vs if v.reasoning])
                child.scores[criterion] = CriterionScore(
                    criterion=criterion, votes=vs, score=score,
                    likert=likert_from_score(score), summary=summary)
            child.reward = sum(child.scores[c].score for c in CRITERIA) / len(CRITERIA)

    def _parse_vote(self, request, response, judge) -> Vote:
        if isinstance(response, Exception):
            return Vote(judge=judge, verdict=None, reasoning=str(response))
        try:
            return self._vote_from_text(response.text, judge)
        except ExtractionError:
            retry = CompletionRequest(
                model=request.model,
                system=request.system + "\n\nYour previous reply was malformed. Use the "
                                        "required <REASONING> and <RESULT> blocks exactly.",
                user=request.user, temperature=request.temperature,
                tag=request.tag + "/retry")
            try:
                resp2 = self.gateway.complete(retry)
                return self._vote_from_text(resp2.text, judge)
            except Exception:  # noqa: BLE001 - abstain on any failure
                return Vote(judge=judge, verdict=None, reasoning="(abstained: unparseable vote)")

    @staticmethod
    def _vote_from_text(text, judge) -> Vote:
        verdict = extract_tagged(text, "RESULT", vocabulary={"Yes", "No"})
        try:
            reasoning = extract_tagged(text, "REASONING")
        except ExtractionError:
            reasoning = ""
        return Vote(judge=judge, verdict=(verdict == "Yes"), reasoning=reasoning)

    def _summarize(self, cid, criterion, reasonings) -> str:
        if not reasonings:
            return ""
        system, user = self.catalog.render("summarize_reasoning",
                                           reasonings="\n---\n".join(reasonings))
        req = CompletionRequest(model=self.committee[0], system=system, user=user,
                                tag=f"summary/{cid}/{criterion}")
        resp = self.gateway.complete(req)
        return resp.text.strip() if not isinstance(resp, Exception) else ""

    # -- the iteration ------------------------------------------------------

    def step(self, tree: Tree) -> TreeDelta:
        """One full iteration: select, expand, score all children, backpropagate."""
        node_id = select(tree)  # raises SearchComplete
        delta = TreeDelta(selected=node_id)
        new_ids = self.expand(tree, node_id)
        try:
            self.score_children(tree, new_ids)
        except Exception:
            # atomicity: a failed scoring pass removes the new children
            node = tree.node(node_id)
            for cid in new_ids:
                node.children.remove(cid)
                del tree.nodes[cid]
            raise
        for cid in new_ids:
            backpropagate(tree, cid, tree.node(cid).reward)
            delta.new_nodes.append(tree.node(cid).to_dict())
        for nid in tree.path_to_root(node_id):
            n = tree.node(nid)
            delta.updated[nid] = {"visits": n.visits, "value_sum": n.value_sum}
        best_path(tree)
        return delta

    def run_until_complete(self, tree: Tree, max_nodes: int | None = None) -> int:
        """Loop step() until the frontier is exhausted or the node budget hits."""
        budget = max_nodes if max_nodes is not None else tree.config.max_nodes
        steps = 0
        while len(tree.nodes) < budget:
            try:
                self.step(tree)
            except SearchComplete:
                break
            steps += 1
        return steps

    # -- human interventions ------------------------------------------------

    def override_score(self, tree: Tree, node_id: str, criterion: str, likert: int,
                       explanation: str | None = None) -> TreeDelta:
        node = tree.node(node_id)
        if criterion not in CRITERIA:
            raise SpecValidationError(f"unknown criterion {criterion!r}", "override")
        if criterion not in node.scores:
            raise SpecValidationError(f"node {node_id} has no {criterion} score yet", "override")
        if not 1 <= likert <= 5:
            raise SpecValidationError("likert must be in 1..5", "override")
        old_reward = node.reward
        cs = node.scores[criterion]
        cs.score = score_from_likert(likert)
        cs.likert = likert
        cs.overridden = True
        cs.override_explanation = explanation
        node.reward = sum(node.scores[c].score for c in CRITERIA) / len(CRITERIA)
        delta_r = node.reward - old_reward
        # retroactive adjustment: the node's mean shifts by exactly delta_r,
        # applied once per propagation that passed through it
        adjust = delta_r * node.visits
        node.own_mass += adjust
        delta = TreeDelta()
        for nid in tree.path_to_root(node_id):
            n = tree.node(nid)
            n.value_sum += adjust
            delta.updated[nid] = {"visits": n.visits, "value_sum": n.value_sum}
        if explanation:
            context = f"{node.task.label}: {node.task.description}"
            tree.feedback.add_exemplar(criterion, context, likert, explanation)
        best_path(tree)
        delta.updated[node_id] = {**delta.updated.get(node_id, {}),
                                  "reward": node.reward,
                                  "scores": {c: s.to_dict() for c, s in node.scores.items()}}
        return delta

    def delete_subtree(self, tree: Tree, node_id: str) -> TreeDelta:
        if node_id == tree.root_id:
            raise SpecValidationError("root is not deletable", "delete")
        parent_id = tree.parent_of(node_id)
        removed = tree.subtree_ids(node_id)
        node = tree.node(node_id)
        n_total, q_total = node.visits, node.value_sum  # equal subtree injections
        delta = TreeDelta(removed=list(removed))
        for nid in tree.path_to_root(parent_id):
            n = tree.node(nid)
            n.visits -= n_total
            n.value_sum -= q_total
            delta.updated[nid] = {"visits": n.visits, "value_sum": n.value_sum}
        tree.node(parent_id).children.remove(node_id)
        for nid in removed:
            del tree.nodes[nid]
        tree.selected_plan = [nid for nid in tree.selected_plan if nid in tree.nodes]
        best_path(tree)
        return delta

    def regenerate_subtree(self, tree: Tree, node_id: str) -> TreeDelta:
        """Delete the branch, then expand its parent with fresh alternatives."""
        parent_id = tree.parent_of(node_id)
        if parent_id is None:
            raise SpecValidationError("root is not regenerable", "regenerate")
        delta = self.delete_subtree(tree, node_id)
        new_ids = self.expand(tree, parent_id)
        self.score_children(tree, new_ids)
        for cid in new_ids:
            backpropagate(tree, cid, tree.node(cid).reward)
            delta.new_nodes.append(tree.node(cid).to_dict())
        for nid in tree.path_to_root(parent_id):
            n = tree.node(nid)
            delta.updated[nid] = {"visits": n.visits, "value_sum": n.value_sum}
        best_path(tree)
        return delta

    def add_manual_children(self, tree: Tree, node_id: str, tasks: list[dict]) -> TreeDelta:
        """Attach human-authored children; they are scored like generated ones."""
        node = tree.node(node_id)
        if node.is_end:
            raise SpecValidationError("cannot add children to an END node", "add_children")
        if node.depth >= tree.config.max_depth:
            raise SpecValidationError("max depth reached", "add_children")
        delta = TreeDelta(selected=node_id)
        new_ids = []
        for raw in tasks:
            cid = tree.fresh_id()
            task = SemanticTask(id=cid, label=str(raw["label"]),
                                description=str(raw.get("description", "")),
                                explanation=str(raw.get("explanation", "")),
                                parent_ids=[] if node_id == tree.root_id else [node_id])
            child = MctsNode(task=task, depth=node.depth + 1,
                             is_end=(task.label.upper() == "END"),
                             newest_generation=True, user_created=True)
            tree.nodes[cid] = child
            node.children.append(cid)
            new_ids.append(cid)
        self.score_children(tree, new_ids)
        for cid in new_ids:
            backpropagate(tree, cid, tree.node(cid).reward)
            delta.new_nodes.append(tree.node(cid).to_dict())
        best_path(tree)
        return delta

    def redefine_criterion(self, tree: Tree, criterion: str, definition: str):
        if criterion not in CRITERIA:
            raise SpecValidationError(f"unknown criterion {criterion!r}", "redefine")
        tree.feedback.definitions[criterion] = definition

    def select_plan(self, tree: Tree, leaf_id: str) -> list[str]:
        path = list(reversed(tree.path_to_root(leaf_id)))
        tree.selected_plan = [nid for nid in path if nid != tree.root_id]
        return tree.selected_plan
