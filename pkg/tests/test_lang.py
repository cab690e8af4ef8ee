import pytest
from hypothesis import given, strategies as st

from autrecipe.lang import (
    RAW,
    Conj,
    DuplicateElement,
    ElementOutOfWindow,
    Language,
    Literal,
    ParameterOutOfWindow,
    StructureError,
    UnknownRelation,
    WindowStructure,
    canonical_key,
    evaluate,
    nonredundant_expansion,
    parse_formula,
    set_partitions,
    substructure,
)

from conftest import GRAPH, graph


def test_single_edge_formula():
    s = WindowStructure(GRAPH, 2, frozenset([("E", (0, 1))]))
    assert evaluate(s, parse_formula("E(0,1)"))
    # repeated entries never hold in a non-redundant structure
    assert not evaluate(s, parse_formula("E(0,0)"))


def test_triangle_conjunction_false(triangle):
    assert not evaluate(triangle, parse_formula("E(0,1) & E(1,2) & !E(0,2)"))
    assert evaluate(triangle, parse_formula("!E(0,1) | E(0,2)"))


def test_formula_errors(triangle):
    with pytest.raises(ParameterOutOfWindow):
        evaluate(triangle, parse_formula("E(0,5)"))
    with pytest.raises(UnknownRelation):
        evaluate(triangle, parse_formula("Red(0)"))


def test_structure_validation():
    with pytest.raises(StructureError):
        WindowStructure(GRAPH, 2, frozenset([("E", (0, 0))]))
    with pytest.raises(ElementOutOfWindow):
        WindowStructure(GRAPH, 2, frozenset([("E", (0, 2))]))
    with pytest.raises(UnknownRelation):
        WindowStructure(GRAPH, 2, frozenset([("F", (0, 1))]))
    with pytest.raises(StructureError):
        WindowStructure(GRAPH, 2, frozenset(), "canonical")


def test_substructure_examples(triangle, path3):
    assert substructure(triangle, [0, 1]).facts == graph(2, [(0, 1)]).facts
    assert substructure(path3, [0, 2]).facts == frozenset()
    assert substructure(triangle, [0, 1, 2]) == triangle
    with pytest.raises(DuplicateElement):
        substructure(triangle, [0, 0])


def test_relabel_changes_key_only_up_to_isomorphism(path3):
    moved = path3.relabel([2, 0, 1])
    assert moved.facts != path3.facts
    assert moved.key == path3.key


def test_nonredundant_expansion_of_binary():
    target, tr = nonredundant_expansion(GRAPH)
    assert dict(target.relations) == {"E[00]": 1, "E[01]": 2}
    raw = WindowStructure(GRAPH, 1, frozenset([("E", (0, 0))]), RAW)
    assert tr.forward(raw).facts == {("E[00]", (0,))}


facts_strategy = st.sets(
    st.tuples(st.integers(0, 2), st.integers(0, 2)).map(lambda t: ("E", t)), max_size=9
)


@given(facts_strategy)
def test_nonredundant_round_trip(facts):
    _, tr = nonredundant_expansion(GRAPH)
    s = WindowStructure(GRAPH, 3, frozenset(facts), RAW)
    assert tr.backward(tr.forward(s)) == s


@given(st.integers(0, 6))
def test_set_partition_counts_are_bell_numbers(n):
    assert len(set_partitions(n)) == [1, 1, 2, 5, 15, 52, 203][n]


@given(facts_strategy.map(lambda fs: {f for f in fs if f[1][0] != f[1][1]}), st.permutations([0, 1, 2]))
def test_canonical_key_is_relabel_invariant(facts, perm):
    s = WindowStructure(GRAPH, 3, frozenset(facts))
    assert canonical_key(3, s.relabel(perm).facts) == s.key


def test_conjunction_helpers():
    c = Conj.of(Literal("E", (0, 1))) & ~Literal("E", (0, 1))
    assert c.is_contradictory()
    assert Conj.from_diagram({("E", (0, 1))}, GRAPH.slots(2)).literals == {
        Literal("E", (0, 1)), Literal("E", (1, 0), False)
    }
    assert Language.of(("U", 1), ("E", 2)).slots(2, ordered=True) == [("U", (0,)), ("U", (1,)), ("E", (0, 1))]
