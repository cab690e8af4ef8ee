import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from autrecipe.canonical import free_completion
from autrecipe.generators import COLORING, coloring_aut_recipe, random_aut_recipe, random_box, random_sym_recipe, threshold_recipe
from autrecipe.lang import Language, WindowStructure
from autrecipe.measure import check_invariance, restrict_measure
from autrecipe.presets import colored, pure_set, rado, triangle_free
from autrecipe.qftypes import OrderedQfType
from autrecipe.recipe import (
    BaseRealizationMissing,
    GridExplosion,
    NotAgreeingWithCM,
    NotEquivariant,
    NotFree,
    StepFunction,
    SymRecipe,
    UniformArray,
    WindowTooLarge,
    box_volume,
    combine,
    compose_with_region,
    coords,
    erdos_renyi,
    extend_to_free,
    pushforward,
    region_maps,
    sample,
    window_distribution,
)

HALF, THIRD = Fraction(1, 2), Fraction(1, 3)
GRAPH = Language.of(("E", 2))


def edge_recipe(threshold=HALF):
    return threshold_recipe(GRAPH, "E", (0, 1), threshold)


def test_coords_order():
    assert coords(2) == ((), (0,), (1,), (0, 1))
    assert len(coords(3)) == 8


def test_constant_recipe_gives_empty_structure():
    lang = Language.of(("Red", 1), ("E", 2))
    recipe = SymRecipe(lang, {k: StepFunction.constant(k, lang) for k in (1, 2)})
    for seed in range(5):
        assert sample(recipe, 4, UniformArray(seed)).facts == frozenset()
    assert window_distribution(recipe, 3) == {frozenset(): 1}


def test_threshold_recipe_replays_by_hand():
    recipe = threshold_recipe(COLORING, "Red", (0,), THIRD)
    array = UniformArray(11)
    out = sample(recipe, 6, array)
    expected = {("Red", (i,)) for i in range(6) if array((i,)) < THIRD}
    assert out.facts == expected


def test_edge_threshold_reads_the_pair_coordinate():
    array = UniformArray(4)
    out = sample(edge_recipe(), 4, array)
    expected = {("E", (a, b)) for a, b in itertools.permutations(range(4), 2) if array((a, b)) < HALF}
    assert out.facts == expected
    # both orders read the same array entry, so the sampled relation is symmetric
    assert all(("E", (b, a)) in out.facts for _, (a, b) in out.facts)


def test_aut_coloring_replays_by_hand():
    r = rado(3)
    realization = sample(erdos_renyi(r), 5, UniformArray(1))
    array = UniformArray(2)
    out = sample(coloring_aut_recipe(r), 5, array, realization)
    assert out.facts == {("Red", (i,)) for i in range(5) if array((i,)) < THIRD}


def test_pushforward_of_thresholds():
    table = pushforward(edge_recipe(), 2).tables["D2"]
    assert table == {frozenset(): HALF, frozenset([("E", (0, 1)), ("E", (1, 0))]): HALF}
    er = pushforward(erdos_renyi(rado(3)), 3).tables["D3"]
    assert len(er) == 8 and set(er.values()) == {Fraction(1, 8)}


def test_pushforward_matches_brute_force_grid():
    # oracle: evaluate the recipe at the midpoint of every cell of a fine common grid
    rng = random.Random(3)
    recipe = random_sym_recipe(Language.of(("Red", 1), ("F", 2)), rng)
    n = 2
    step = Fraction(1, 6)
    mids = [step * i + step / 2 for i in range(6)]
    subsets = [s for m in range(n + 1) for s in itertools.combinations(range(n), m)]
    counts = {}
    for values in itertools.product(mids, repeat=len(subsets)):
        point = dict(zip(subsets, values))

        class Fixed(UniformArray):
            def raw(self, subset, point=point):
                return int(point[tuple(sorted(subset))] * 2**self.bits)

        d = sample(recipe, n, Fixed(0)).facts
        counts[d] = counts.get(d, 0) + 1
    total = 6 ** len(subsets)
    assert window_distribution(recipe, n) == {d: Fraction(c, total) for d, c in counts.items()}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.permutations(range(3)))
def test_sym_recipes_are_exchangeable(seed, perm):
    recipe = random_sym_recipe(Language.of(("Red", 1), ("F", 2)), random.Random(seed))
    table = window_distribution(recipe, 3)
    moved = {}
    for d, w in table.items():
        key = WindowStructure(recipe.language, 3, d).relabel(perm).facts
        moved[key] = moved.get(key, 0) + w
    assert moved == table


@settings(max_examples=3, deadline=None)
@given(st.integers(0, 10**6))
def test_aut_recipes_give_invariant_measures(seed):
    assert check_invariance(pushforward(random_aut_recipe(triangle_free(3), random.Random(seed)), 3)).ok


def labeled_structures(pres, n):
    """Oracle: every consistent choice of relation on the increasing tuples of the window."""
    tuples = [t for m in range(1, n + 1) for t in itertools.combinations(range(n), m)]
    options = [pres.language.of_arity(len(t)) for t in tuples]
    out = set()
    for choice in itertools.product(*options):
        assign = dict(zip(tuples, choice))
        if pres.is_consistent(assign):
            out.add(pres.structure(n, assign).facts)
    return out


@pytest.mark.parametrize("name", ["rado", "free-completion"])
def test_erdos_renyi_support_is_the_age(name):
    pres = rado(3) if name == "rado" else free_completion(triangle_free(3), 3)
    assert set(window_distribution(erdos_renyi(pres), 3)) == labeled_structures(pres, 3)


def test_erdos_renyi_on_one_type_per_arity_is_constant():
    base = pure_set(3)
    er = erdos_renyi(base)
    assert all(len(f.cells) == 1 for f in er.functions.values())
    only = base.structure(3, {t: f"D{len(t)}" for m in (1, 2, 3) for t in itertools.combinations(range(3), m)})
    assert window_distribution(er, 3) == {only.facts: 1}


def test_erdos_renyi_rejects_non_free():
    with pytest.raises(NotFree) as err:
        erdos_renyi(triangle_free(3))
    assert err.value.witness.parts == ("E", "E", "E")


def test_erdos_renyi_refuses_directed_bases():
    # a swap fixes both points of a pair but moves the arrow, and both orders read one coordinate
    digraphs = colored(GRAPH, 2, max_arity=2)
    with pytest.raises(NotEquivariant) as err:
        erdos_renyi(digraphs)
    assert err.value.witness["tuple"] == (1, 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_erdos_renyi_samples_are_canonical(n):
    pres = rado(3)
    er = erdos_renyi(pres)
    for seed in range(30):
        s = sample(er, n, UniformArray(seed))
        assigned = {t: s.relation_at(t) for t in s.by_tuple if list(t) == sorted(t)}
        assert pres.structure(n, assigned).facts == s.facts


def test_region_maps_two_unary_types():
    base = colored(Language.of(("A", 1)), 2, max_arity=1)
    maps = region_maps(base)
    first, second = base.language.of_arity(1)
    assert maps[first].intervals[(0,)] == (0, HALF)
    assert maps[second].intervals[(0,)] == (HALF, 1)


def test_region_maps_graph_edge():
    maps = region_maps(rado(3))
    assert maps["E"].intervals[(0, 1)] == (0, HALF)
    assert maps["E*"].intervals[(0, 1)] == (HALF, 1)
    assert maps["U"].volume() == 1
    assert sum(m.volume() for m in maps.values() if m.arity == 3) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_region_chart_scales_volume(seed):
    rng = random.Random(seed)
    maps = region_maps(rado(3))
    rm = maps[rng.choice(sorted(maps))]
    box = random_box(rng, rm.intervals)
    assert box_volume(rm.preimage_box(box)) == box_volume(box) / rm.volume()
    point = {c: Fraction(rng.randrange(100), 100) for c in coords(rm.arity)}
    assert rm.alpha_inv(rm.alpha(point)) == point and rm.contains(rm.alpha(point))


def test_extend_over_free_base_is_identity():
    r = rado(3)
    f = random_aut_recipe(r, random.Random(0))
    g = extend_to_free(f, r)
    assert all(g.functions[p] is f.functions[p] for p in f.functions)
    assert pushforward(g, 3).same_tables(pushforward(f, 3))


def test_extend_then_restrict_round_trip():
    tf = triangle_free(3)
    fc = free_completion(tf, 3)
    f = random_aut_recipe(tf, random.Random(1))
    assert restrict_measure(pushforward(extend_to_free(f, fc), 3), tf).same_tables(pushforward(f, 3))


def test_compose_trivial_part_is_constant():
    r = rado(3)
    silent = SymRecipe(COLORING, {1: StepFunction.constant(1, COLORING)})
    composed = compose_with_region(combine(erdos_renyi(r), silent), r)
    assert all(v == OrderedQfType(COLORING, 1) for f in composed.functions.values() for v in f.cells.values())


def test_compose_reproduces_coloring():
    r = rado(3)
    composed = compose_with_region(combine(erdos_renyi(r), threshold_recipe(COLORING, "Red", (0,), THIRD)), r)
    assert pushforward(composed, 3).same_tables(pushforward(coloring_aut_recipe(r), 3))


def test_compose_conditional_law_at_window_two():
    # the pair colour is read through the chart of the edge region, so conditioning on E gives the original law
    r = rado(2)
    pair = threshold_recipe(Language.of(("F", 2)), "F", (0, 1), Fraction(1, 4))
    e = combine(erdos_renyi(r), pair)
    composed = compose_with_region(e, r)
    joint = window_distribution(e, 2)
    edge = {d: w for d, w in joint.items() if ("E", (0, 1)) in d}
    total = sum(edge.values())
    conditional = {frozenset(f for f in d if f[0] == "F"): w / total for d, w in edge.items()}
    assert window_distribution(composed, 2, r.diagram_structure("E")) == conditional


def test_compose_rejects_disagreeing_recipe():
    r = rado(3)
    wrong = combine(edge_recipe_over(r, Fraction(1, 3)), threshold_recipe(COLORING, "Red", (0,), THIRD))
    with pytest.raises(NotAgreeingWithCM) as err:
        compose_with_region(wrong, r)
    assert err.value.witness["arity"] == 2


def edge_recipe_over(r, threshold):
    """Like the Erdos-Renyi recipe of ``r`` but with edges at the given density."""
    er = erdos_renyi(r)
    f2 = er.functions[2]
    lang = r.language
    grid = dict(f2.grid)
    grid[(0, 1)] = (threshold,)
    functions = dict(er.functions)
    functions[2] = StepFunction.from_rule(
        2, lang, grid, lambda pt: OrderedQfType(lang, 2, frozenset(
            [("U", (0,)), ("U", (1,)), ("E" if pt[(0, 1)] < threshold else "E*", (0, 1))]))
    )
    return SymRecipe(lang, functions)


def test_window_limits():
    with pytest.raises(WindowTooLarge):
        sample(edge_recipe(), 9, UniformArray(0), max_window=8)
    with pytest.raises(BaseRealizationMissing):
        sample(coloring_aut_recipe(rado(3)), 3, UniformArray(0))
    with pytest.raises(BaseRealizationMissing):
        sample(coloring_aut_recipe(rado(3)), 3, UniformArray(0), WindowStructure(rado(3).language, 3, frozenset()))
    with pytest.raises(GridExplosion):
        window_distribution(erdos_renyi(rado(3)), 5, cell_cap=10)


def test_sampling_is_deterministic():
    er = erdos_renyi(rado(3))
    a = [sample(er, 5, UniformArray(7, i)).facts for i in range(20)]
    b = [sample(er, 5, UniformArray(7, i)).facts for i in range(20)]
    assert a == b and len(set(a)) > 1


def test_uniform_array_values_lie_in_unit_interval():
    array = UniformArray(0, bits=16)
    values = [array((i,)) for i in range(200)]
    assert all(0 <= v < 1 for v in values) and len(set(values)) > 150
