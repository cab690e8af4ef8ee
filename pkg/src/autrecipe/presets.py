"""Ready-made languages, ages and presentations used by the CLI and the tests."""

from __future__ import annotations

import itertools
from functools import lru_cache

from .ages import Age, age_of, enumerate_age
from .canonical import (
    CanonicalPresentation,
    canonicalize,
    default_namer,
    free_completion,
    is_free,
    is_sub_can,
    with_generated_age,
)
from .lang import Language, WindowStructure, injective_tuples

GRAPH = Language.of(("E", 2))
SUCCESSOR = Language.of(("S", 2))


def graph_namer(n: int, facts: frozenset) -> str:
    """Names for canonical relations of a symmetric graph language."""
    if n == 1:
        return "U"
    if n == 2:
        return "E" if facts else "E*"
    edges = sorted({tuple(sorted(t)) for _, t in facts})
    return f"R{n}[{','.join(''.join(map(str, e)) for e in edges)}]"


def is_triangle_free(n: int, facts) -> bool:
    return not any(
        ("E", (a, b)) in facts and ("E", (b, c)) in facts and ("E", (a, c)) in facts
        for a, b, c in itertools.combinations(range(n), 3)
    )


@lru_cache(maxsize=None)
def graph_age(bound: int) -> Age:
    return enumerate_age(GRAPH, bound, symmetric=("E",))


@lru_cache(maxsize=None)
def triangle_free_age(bound: int) -> Age:
    return enumerate_age(GRAPH, bound, accept=is_triangle_free, symmetric=("E",))


@lru_cache(maxsize=None)
def successor_age(bound: int) -> Age:
    """Finite successor paths: induced substructures of a long directed path."""
    n = max(bound, 2) + 2
    path = WindowStructure(SUCCESSOR, n, frozenset(("S", (i, i + 1)) for i in range(n - 1)))
    return age_of([path], bound)


@lru_cache(maxsize=None)
def rado(max_arity: int = 3, age_bound: int | None = None) -> CanonicalPresentation:
    return canonicalize(graph_age(age_bound or max_arity), max_arity, graph_namer)


@lru_cache(maxsize=None)
def triangle_free(max_arity: int = 3, age_bound: int | None = None) -> CanonicalPresentation:
    return canonicalize(triangle_free_age(age_bound or max_arity), max_arity, graph_namer)


@lru_cache(maxsize=None)
def successor(max_arity: int = 3) -> CanonicalPresentation:
    return canonicalize(successor_age(max_arity), max_arity)


def pure_set(max_arity: int = 3) -> CanonicalPresentation:
    """The structure with no relations: one canonical relation per arity."""
    lang = Language(tuple((f"D{k}", k) for k in range(1, max_arity + 1)))
    table = {(f"D{k}", t): f"D{len(t)}" for k in range(1, max_arity + 1) for t in injective_tuples(k, k)}
    pres = CanonicalPresentation(lang, table, None, Language(), {f"D{k}": frozenset() for k in range(1, max_arity + 1)})
    return with_generated_age(pres, max_arity)


def colored(language: Language, bound: int, symmetric=(), accept=None, namer=None, max_arity=3):
    age = enumerate_age(language, bound, accept=accept, symmetric=symmetric)
    return canonicalize(age, max_arity, namer or default_namer)


def free_pool(max_arity: int = 3) -> list[tuple[str, CanonicalPresentation]]:
    """Small free presentations, for minimality checks of free completions."""
    bound = max_arity
    U2 = Language.of(("E", 2), ("F", 2))
    pool = [
        ("graphs", rado(max_arity)),
        ("graphs+red", colored(Language.of(("Red", 1), ("E", 2)), bound, symmetric=("E",), max_arity=max_arity)),
        ("graphs+red+blue", colored(Language.of(("Red", 1), ("Blue", 1), ("E", 2)), bound, symmetric=("E",), max_arity=max_arity)),
        ("digraphs", colored(Language.of(("E", 2)), bound, max_arity=max_arity)),
        ("two-graphs", colored(U2, bound, symmetric=("E", "F"), max_arity=max_arity)),
        ("graphs+hyperedges", colored(Language.of(("E", 2), ("H", 3)), bound, symmetric=("E",), max_arity=max_arity)),
        ("graph-with-loopless-digraph", colored(U2, bound, symmetric=("E",), max_arity=max_arity)),
        ("tournaments", colored(
            Language.of(("E", 2)), bound,
            accept=lambda n, f: all((("E", (a, b)) in f) != (("E", (b, a)) in f) for a, b in itertools.combinations(range(n), 2)),
            max_arity=max_arity,
        )),
        ("pure-set", pure_set(max_arity)),
    ]
    tf = triangle_free(max_arity)
    pool.append(("free-completion(triangle-free)", free_completion(tf, max_arity)))
    return [(name, p) for name, p in pool if is_free(p).free]


def sub_can_pool(m: CanonicalPresentation, max_arity: int = 3):
    return [(name, n) for name, n in free_pool(max_arity) if is_sub_can(m, n).ok]
