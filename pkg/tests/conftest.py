import itertools

import pytest

from autrecipe.lang import Language, WindowStructure

GRAPH = Language.of(("E", 2))


def graph(n, edges):
    facts = set()
    for a, b in edges:
        facts |= {("E", (a, b)), ("E", (b, a))}
    return WindowStructure(GRAPH, n, frozenset(facts))


@pytest.fixture
def triangle():
    return graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return graph(3, [(0, 1), (1, 2)])


def all_graph_fact_sets(n):
    pairs = list(itertools.combinations(range(n), 2))
    for bits in itertools.product((False, True), repeat=len(pairs)):
        yield graph(n, [p for p, b in zip(pairs, bits) if b])
