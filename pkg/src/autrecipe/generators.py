"""Random recipes and measures used by ``verify`` and the tests."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .canonical import CanonicalPresentation
from .lang import Language
from .qftypes import OrderedQfType
from .recipe import AutRecipe, StepFunction, SymRecipe, coords

COLORING = Language.of(("Red", 1))
RICH_EXTRA = Language.of(("Red", 1), ("F", 2), ("H", 3))
# Breakpoints come from a small shared pool so refined grids stay small.
_SPLITS = [(), (Fraction(1, 2),), (Fraction(1, 3),)]


def random_step_function(arity: int, language: Language, rng: random.Random) -> StepFunction:
    grid = {c: rng.choice(_SPLITS) for c in coords(arity)}
    slots = language.slots(arity, ordered=True)
    cells = {}
    for key in itertools.product(*(range(len(grid[c]) + 1) for c in coords(arity))):
        cells[key] = OrderedQfType(language, arity, frozenset(s for s in slots if rng.random() < 0.5))
    return StepFunction(arity, language, grid, cells)


def random_aut_recipe(base: CanonicalPresentation, rng: random.Random, language: Language = RICH_EXTRA) -> AutRecipe:
    functions = {
        p: random_step_function(k, language, rng) for p, k in base.language if k <= language.max_arity
    }
    return AutRecipe(base, language, functions)


def random_sym_recipe(language: Language, rng: random.Random, max_arity: int | None = None) -> SymRecipe:
    top = language.max_arity if max_arity is None else max_arity
    return SymRecipe(language, {k: random_step_function(k, language, rng) for k in range(1, top + 1)})


def threshold_recipe(language: Language, relation: str, coordinate: tuple, threshold) -> SymRecipe:
    """``relation`` holds of the full tuple exactly when the given coordinate lies below ``threshold``."""
    k = language.arity(relation)
    functions = {}
    for j in sorted({a for _, a in language}):
        if j != k:
            functions[j] = StepFunction.constant(j, language)
    top = tuple(range(k))
    functions[k] = StepFunction.from_rule(
        k, language, {coordinate: [Fraction(threshold)]},
        lambda pt: OrderedQfType(language, k, frozenset([(relation, top)]) if pt[coordinate] < threshold else frozenset()),
    )
    return SymRecipe(language, functions)


def coloring_aut_recipe(base: CanonicalPresentation, threshold=Fraction(1, 3)) -> AutRecipe:
    """Each point is Red independently, with probability ``threshold``."""
    functions = {}
    for p in base.language.of_arity(1):
        functions[p] = StepFunction.from_rule(
            1, COLORING, {(0,): [Fraction(threshold)]},
            lambda pt: OrderedQfType(COLORING, 1, frozenset([("Red", (0,))]) if pt[(0,)] < threshold else frozenset()),
        )
    return AutRecipe(base, COLORING, functions)


_LEVELS = [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4)]


def random_colored_graph_recipe(rado: CanonicalPresentation, rng: random.Random) -> SymRecipe:
    """A mixture (selected by the empty-set coordinate) of two colored random graphs.

    Edges and colors use per-regime thresholds; the output speaks the canonical
    graph language plus ``Red``, so its pushforward is concentrated on graph diagrams.
    """
    lang = rado.language.union(COLORING)
    edge = [rng.choice(_LEVELS) for _ in range(2)]
    red = [rng.choice(_LEVELS) for _ in range(2)]
    half = Fraction(1, 2)

    def regime(pt):
        return 0 if pt[()] < half else 1

    def unary(pt):
        facts = {("U", (0,))}
        if pt[(0,)] < red[regime(pt)]:
            facts.add(("Red", (0,)))
        return OrderedQfType(lang, 1, frozenset(facts))

    def binary(pt):
        name = "E" if pt[(0, 1)] < edge[regime(pt)] else "E*"
        return OrderedQfType(lang, 2, frozenset([(name, (0, 1))]))

    def ternary(pt):
        pairs = [c for c in ((0, 1), (0, 2), (1, 2)) if pt[c] < edge[regime(pt)]]
        name = f"R3[{','.join(''.join(map(str, c)) for c in pairs)}]"
        return OrderedQfType(lang, 3, frozenset([(name, (0, 1, 2))]))

    grid1 = {(): [half], (0,): sorted(set(red))}
    grid2 = {(): [half], (0, 1): sorted(set(edge))}
    grid3 = {(): [half], **{c: sorted(set(edge)) for c in ((0, 1), (0, 2), (1, 2))}}
    functions = {
        1: StepFunction.from_rule(1, lang, grid1, unary),
        2: StepFunction.from_rule(2, lang, grid2, binary),
        3: StepFunction.from_rule(3, lang, grid3, ternary),
    }
    return SymRecipe(lang, functions)


def random_rational(rng: random.Random, lo: Fraction, hi: Fraction, denominator: int = 97) -> Fraction:
    return lo + (hi - lo) * Fraction(rng.randrange(denominator + 1), denominator)


def random_box(rng: random.Random, intervals) -> dict:
    box = {}
    for c, (lo, hi) in intervals.items():
        a, b = sorted((random_rational(rng, lo, hi), random_rational(rng, lo, hi)))
        if a == b:
            b = min(hi, a + (hi - lo) / 97)
            a = b - (hi - lo) / 97
        box[c] = (a, b)
    return box
