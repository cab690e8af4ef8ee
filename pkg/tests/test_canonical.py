import itertools

import pytest
from hypothesis import given, settings, strategies as st

from autrecipe.canonical import (
    CompatibleCollection,
    IncompatibleCollection,
    canonicalize,
    enumerate_compatible,
    extensions_of,
    free_completion,
    generate_age,
    has_trivial_dcl,
    is_compatible,
    is_free,
    is_sub_can,
    restrict_relation,
)
from autrecipe.lang import injective_tuples
from autrecipe.presets import graph_age, pure_set, rado, triangle_free

from conftest import graph


def test_graph_presentation_shapes():
    r2 = rado(2)
    assert len(r2.language.of_arity(1)) == 1
    assert set(r2.language.of_arity(2)) == {"E", "E*"}
    r3 = rado(3)
    # 3-vertex graphs up to isomorphism are fixed by their edge count 0..3
    assert len(r3.relation_classes(3)) == 4
    # labelled arity-3 relations: one per labelled 3-vertex graph
    assert len(r3.language.of_arity(3)) == 8


def test_edgeless_pair_presentation():
    pres = canonicalize(graph(2, []), 2)
    assert len(pres.language.of_arity(1)) == 1 and len(pres.language.of_arity(2)) == 1
    binary = pres.language.of_arity(2)[0]
    assert restrict_relation(pres, binary, (0,)) == pres.language.of_arity(1)[0]
    assert pres.permuted(binary, (1, 0)) == binary


def test_restrict_examples():
    r = rado(3)
    assert restrict_relation(r, "R3[01,02,12]", (0, 1)) == "E"
    assert restrict_relation(r, "R3[01,02,12]", (0, 1, 2)) == "R3[01,02,12]"
    # path with the middle vertex at index 1: endpoints are not adjacent
    assert restrict_relation(r, "R3[01,12]", (0, 2)) == "E*"


def test_sub_can_examples():
    tf, r = triangle_free(3), rado(3)
    assert is_sub_can(tf, r).ok
    back = is_sub_can(r, tf)
    assert not back.ok
    assert back.witness.source_type == {("E", (0, 1)), ("E", (1, 0)), ("E", (0, 2)), ("E", (2, 0)), ("E", (1, 2)), ("E", (2, 1))}
    same = is_sub_can(r, r)
    assert same.ok and all(k == v for k, v in same.embedding.items())


def test_compatible_collections():
    r = rado(3)
    colls = enumerate_compatible(r, 3)
    # oracle: a triple of binary relations, one per face, is determined by three independent edge bits
    assert len(colls) == 8
    assert {c.parts for c in colls} == set(itertools.product(["E", "E*"], repeat=3))
    classes = {frozenset(itertools.permutations(c.parts)) for c in colls}
    assert len(classes) == 4
    tf = triangle_free(3)
    assert CompatibleCollection(("E", "E", "E")) in enumerate_compatible(tf, 3)
    assert len(enumerate_compatible(r, 2)) == 1


def test_extensions():
    r, tf = rado(3), triangle_free(3)
    assert extensions_of(r, ("E", "E", "E")) == ["R3[01,02,12]"]
    assert extensions_of(tf, ("E", "E", "E")) == []
    assert all(len(extensions_of(r, c)) == 1 for c in enumerate_compatible(r, 3))
    with pytest.raises(IncompatibleCollection):
        # the faces of a 4-tuple must agree on shared pairs
        extensions_of(r, ("R3[]", "R3[]", "R3[]", "R3[01,02,12]"))


def test_is_free_examples():
    assert is_free(rado(4)).free
    report = is_free(triangle_free(3))
    assert not report.free and str(report.witness) == "⟨E,E,E⟩"
    assert is_free(canonicalize(graph(1, []), 1)).free


def test_free_completion_examples():
    tf = triangle_free(3)
    fc = free_completion(tf, 3)
    realized = len(tf.relation_classes(3))
    assert realized == 3 and len(fc.relation_classes(3)) == 4
    assert fc.language.of_arity(1) == tf.language.of_arity(1)
    assert is_free(fc).free
    r4 = rado(4)
    same = free_completion(r4, 4)
    assert same.language == r4.language and same.table == r4.table


def test_free_completion_is_rado_up_to_relabelling():
    fc = free_completion(triangle_free(3), 3)
    assert is_sub_can(fc, rado(3)).ok and is_sub_can(rado(3), fc).ok


def test_trivial_dcl():
    assert has_trivial_dcl(graph_age(4))[0]
    fc = free_completion(triangle_free(3), 3)
    assert has_trivial_dcl(fc)[0]


def test_generated_age_matches_enumerated():
    # the age rebuilt from the restriction table equals the one read off the graphs
    r = rado(3)
    assert set(generate_age(r, 3).members) == set(r.age.members)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["rado", "triangle-free", "pure-set"]), st.data())
def test_restriction_composes(name, data):
    pres = {"rado": rado(3), "triangle-free": triangle_free(3), "pure-set": pure_set(3)}[name]
    rel = data.draw(st.sampled_from(pres.language.names))
    k = pres.language.arity(rel)
    outer = data.draw(st.sampled_from(list(injective_tuples(k, k))))
    inner = data.draw(st.sampled_from(list(injective_tuples(len(outer), len(outer)))))
    once = pres.restrict(rel, tuple(outer[i] for i in inner))
    twice = pres.restrict(pres.restrict(rel, outer), inner)
    assert once == twice


def test_is_compatible_checks_overlaps():
    r = rado(3)
    assert is_compatible(r, ("U", "U"))
    assert is_compatible(r, ("E", "E*", "E"))
