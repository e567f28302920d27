"""Shared fixtures and random-tree builders for the test suite."""
import random

import pytest

from textsteer.gateway import FixtureStore, Gateway, ModelRef
from textsteer.prompts import PromptCatalog
from textsteer.scripted import ScriptedTransport
from textsteer.speclang import MctsNode, SearchConfig, SemanticTask, Tree

COMMITTEE = ("judge-a", "judge-b", "judge-c")


@pytest.fixture
def gateway():
    return Gateway(transport=ScriptedTransport(), mode="record", fixtures=FixtureStore())


@pytest.fixture
def catalog():
    return PromptCatalog.load()


@pytest.fixture
def committee():
    return [ModelRef(provider="scripted", model=name) for name in COMMITTEE]


@pytest.fixture
def docs():
    people = ["Alice", "Bob", "Carol", "Dave", "Erin", "Frank"]
    return [{"id": f"d{i}",
             "content": f"{people[i % len(people)]} wrote a report about cameras, "
                        f"batteries and shipping delays in week {i}."}
            for i in range(8)]


def make_random_tree(rng: random.Random, max_depth=5, k=2) -> Tree:
    """A structurally valid tree with random visit statistics for selection tests.

    Rewards/visits are arbitrary (selection does not require conservation);
    every non-root node gets a reward, visited nodes get consistent ids.
    """
    tree = Tree(goal="g", config=SearchConfig(max_depth=max_depth, k=k))
    root_id = tree.fresh_id()
    tree.nodes[root_id] = MctsNode(task=SemanticTask(id=root_id, label="GOAL", description="g"))
    tree.root_id = root_id
    frontier = [root_id]
    n_nodes = rng.randint(1, 25)
    for _ in range(n_nodes):
        if not frontier:
            break
        parent_id = rng.choice(frontier)
        parent = tree.node(parent_id)
        if parent.depth >= max_depth or parent.is_end:
            frontier.remove(parent_id)
            continue
        cid = tree.fresh_id()
        child = MctsNode(
            task=SemanticTask(id=cid, label=f"Step {cid}"),
            depth=parent.depth + 1,
            is_end=rng.random() < 0.15,
            reward=round(rng.random(), 3),
            visits=rng.randint(0, 6),
        )
        child.value_sum = round(child.visits * rng.random(), 3)
        tree.nodes[cid] = child
        parent.children.append(cid)
        frontier.append(cid)
        if len(parent.children) >= k + 1:
            frontier.remove(parent_id)
    # root visits must dominate for UCT logs; any positive value works
    tree.root.visits = max(1, sum(tree.node(c).visits for c in tree.root.children))
    return tree
