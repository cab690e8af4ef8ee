"""Relational languages, finite window structures and quantifier-free formulas."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

CANONICAL = "canonical"
GENERAL = "general"
# Facts may repeat entries; only used as input to the non-redundant expansion.
RAW = "raw"
MODES = (CANONICAL, GENERAL, RAW)

Fact = tuple[str, tuple[int, ...]]


class UnknownRelation(KeyError):
    pass


class ParameterOutOfWindow(IndexError):
    pass


class ElementOutOfWindow(IndexError):
    pass


class DuplicateElement(ValueError):
    pass


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class Language:
    """Ordered list of ``(name, arity)`` pairs.

    The list order is the chosen ordering used wherever relations of one
    arity have to be listed (extension lists, step-function grids, ...).
    """

    relations: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        rels = tuple((str(n), int(a)) for n, a in self.relations)
        object.__setattr__(self, "relations", rels)
        seen = set()
        for name, arity in rels:
            if name in seen:
                raise ValueError(f"duplicate relation name {name!r}")
            if arity < 1:
                raise ValueError(f"relation {name!r} has arity {arity} < 1")
            seen.add(name)

    @classmethod
    def of(cls, *specs) -> "Language":
        return cls(tuple(specs))

    @cached_property
    def arities(self) -> dict[str, int]:
        return dict(self.relations)

    @cached_property
    def order(self) -> dict[str, int]:
        return {name: i for i, (name, _) in enumerate(self.relations)}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.relations)

    @property
    def max_arity(self) -> int:
        return max((a for _, a in self.relations), default=0)

    def arity(self, name: str) -> int:
        try:
            return self.arities[name]
        except KeyError:
            raise UnknownRelation(name) from None

    def of_arity(self, k: int) -> tuple[str, ...]:
        return tuple(n for n, a in self.relations if a == k)

    def upto(self, k: int) -> "Language":
        return Language(tuple(r for r in self.relations if r[1] <= k))

    def union(self, other: "Language") -> "Language":
        clash = set(self.names) & set(other.names)
        if clash:
            raise ValueError(f"languages are not disjoint: {sorted(clash)}")
        return Language(self.relations + other.relations)

    def __contains__(self, name) -> bool:
        return name in self.arities

    def __len__(self) -> int:
        return len(self.relations)

    def __iter__(self):
        return iter(self.relations)

    def slots(self, n: int, ordered: bool = False) -> list[Fact]:
        """All (relation, tuple) positions over the window ``range(n)``.

        Injective tuples by default; strictly increasing ones if ``ordered``.
        """
        out = []
        for name, k in self.relations:
            if k > n:
                continue
            tuples = itertools.combinations(range(n), k) if ordered else itertools.permutations(range(n), k)
            out.extend((name, t) for t in tuples)
        return out


def injective_tuples(n: int, max_len: int, min_len: int = 1) -> Iterator[tuple[int, ...]]:
    for k in range(min_len, min(n, max_len) + 1):
        yield from itertools.permutations(range(n), k)


def restrict_facts(facts: Iterable[Fact], subset: Sequence[int]) -> frozenset:
    """Facts living inside ``subset``, relabelled to positions in ``subset``."""
    pos = {x: i for i, x in enumerate(subset)}
    out = []
    for rel, t in facts:
        try:
            out.append((rel, tuple(pos[x] for x in t)))
        except KeyError:
            continue
    return frozenset(out)


def relabel_facts(facts: Iterable[Fact], perm: Sequence[int]) -> frozenset:
    return frozenset((rel, tuple(perm[x] for x in t)) for rel, t in facts)


@lru_cache(maxsize=200_000)
def _canonical_facts(n: int, facts: frozenset) -> tuple:
    if n > 8:
        raise ValueError("canonical forms are computed exhaustively only for windows <= 8")
    best = None
    for perm in itertools.permutations(range(n)):
        cand = tuple(sorted((rel, tuple(perm[x] for x in t)) for rel, t in facts))
        if best is None or cand < best:
            best = cand
    return best if best is not None else ()


def canonical_key(n: int, facts: frozenset) -> tuple:
    return (n, _canonical_facts(n, frozenset(facts)))


@dataclass(frozen=True)
class WindowStructure:
    """A structure on the window ``{0, ..., size-1}`` given by its positive facts.

    Every fact not listed is false, so the fact set is a complete diagram.
    """

    language: Language
    size: int
    facts: frozenset = frozenset()
    mode: str = GENERAL

    def __post_init__(self):
        facts = frozenset((str(r), tuple(int(x) for x in t)) for r, t in self.facts)
        object.__setattr__(self, "facts", facts)
        if self.mode not in MODES:
            raise StructureError(f"unknown mode {self.mode!r}")
        for rel, t in facts:
            if rel not in self.language:
                raise UnknownRelation(rel)
            if len(t) != self.language.arity(rel):
                raise StructureError(f"{rel}{t}: arity mismatch")
            if any(x < 0 or x >= self.size for x in t):
                raise ElementOutOfWindow(f"{rel}{t} outside window {self.size}")
            if self.mode != RAW and len(set(t)) != len(t):
                raise StructureError(f"{rel}{t} repeats an entry (non-redundancy)")
        if self.mode == CANONICAL:
            seen = {}
            for rel, t in facts:
                if t in seen:
                    raise StructureError(f"tuple {t} holds both {seen[t]} and {rel}")
                seen[t] = rel
            for t in injective_tuples(self.size, self.language.max_arity):
                if self.language.of_arity(len(t)) and t not in seen:
                    raise StructureError(f"tuple {t} holds no relation")

    @cached_property
    def by_tuple(self) -> dict[tuple[int, ...], tuple[str, ...]]:
        out: dict[tuple[int, ...], list[str]] = {}
        for rel, t in sorted(self.facts):
            out.setdefault(t, []).append(rel)
        return {t: tuple(v) for t, v in out.items()}

    def holds(self, rel: str, t: Sequence[int]) -> bool:
        return (rel, tuple(t)) in self.facts

    def relation_at(self, t: Sequence[int]) -> str:
        rels = self.by_tuple.get(tuple(t), ())
        if len(rels) != 1:
            raise StructureError(f"tuple {tuple(t)} holds {len(rels)} relations")
        return rels[0]

    def relabel(self, perm: Sequence[int]) -> "WindowStructure":
        """The image ``perm . S``: element ``x`` is renamed ``perm[x]``."""
        if sorted(perm) != list(range(self.size)):
            raise ValueError("not a permutation of the window")
        return WindowStructure(self.language, self.size, relabel_facts(self.facts, perm), self.mode)

    def substructure(self, subset: Sequence[int]) -> "WindowStructure":
        return substructure(self, subset)

    def canonical_form(self) -> "WindowStructure":
        return WindowStructure(self.language, self.size, frozenset(_canonical_facts(self.size, self.facts)), self.mode)

    @property
    def key(self) -> tuple:
        return canonical_key(self.size, self.facts)

    def with_facts(self, facts: Iterable[Fact]) -> "WindowStructure":
        return WindowStructure(self.language, self.size, frozenset(facts), self.mode)

    def __repr__(self):
        facts = ", ".join(f"{r}{t}" for r, t in sorted(self.facts))
        return f"WindowStructure(size={self.size}, mode={self.mode}, facts={{{facts}}})"


def substructure(structure: WindowStructure, subset: Sequence[int]) -> WindowStructure:
    """Induced structure on ``subset``, relabelled to ``0..len(subset)-1`` in subset order."""
    subset = tuple(subset)
    if len(set(subset)) != len(subset):
        raise DuplicateElement(f"subset {subset} repeats an element")
    for x in subset:
        if not 0 <= x < structure.size:
            raise ElementOutOfWindow(f"{x} not in window of size {structure.size}")
    return WindowStructure(structure.language, len(subset), restrict_facts(structure.facts, subset), structure.mode)


# ---------------------------------------------------------------------------
# quantifier-free formulas


@dataclass(frozen=True, order=True)
class Literal:
    rel: str
    args: tuple[int, ...]
    positive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(int(a) for a in self.args))

    def __invert__(self) -> "Literal":
        return Literal(self.rel, self.args, not self.positive)

    def __str__(self):
        atom = f"{self.rel}({','.join(map(str, self.args))})"
        return atom if self.positive else "!" + atom


@dataclass(frozen=True)
class Conj:
    """Finite conjunction of literals; the empty conjunction is true."""

    literals: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "literals", frozenset(self.literals))

    @classmethod
    def of(cls, *lits: Literal) -> "Conj":
        return cls(frozenset(lits))

    @classmethod
    def from_diagram(cls, facts: Iterable[Fact], slots: Iterable[Fact]) -> "Conj":
        facts = set(facts)
        return cls(frozenset(Literal(r, t, (r, t) in facts) for r, t in slots))

    def __and__(self, other) -> "Conj":
        if isinstance(other, Literal):
            return Conj(self.literals | {other})
        return Conj(self.literals | other.literals)

    @property
    def params(self) -> set[int]:
        return {x for lit in self.literals for x in lit.args}

    @property
    def relations(self) -> set[str]:
        return {lit.rel for lit in self.literals}

    def is_contradictory(self) -> bool:
        return any(~lit in self.literals for lit in self.literals)

    def __str__(self):
        if not self.literals:
            return "true"
        return " & ".join(str(l) for l in sorted(self.literals))


@dataclass(frozen=True)
class Disj:
    terms: tuple = ()

    @property
    def params(self) -> set[int]:
        return set().union(*(t.params for t in self.terms)) if self.terms else set()

    @property
    def relations(self) -> set[str]:
        return set().union(*(t.relations for t in self.terms)) if self.terms else set()

    def __str__(self):
        return " | ".join(str(t) for t in self.terms) if self.terms else "false"


QfFormula = Conj | Disj


def _check_formula(structure: WindowStructure, formula) -> None:
    terms = formula.terms if isinstance(formula, Disj) else (formula,)
    for term in terms:
        for lit in term.literals:
            if lit.rel not in structure.language:
                raise UnknownRelation(lit.rel)
            if structure.language.arity(lit.rel) != len(lit.args):
                raise UnknownRelation(f"{lit.rel} used with {len(lit.args)} arguments")
            for x in lit.args:
                if not 0 <= x < structure.size:
                    raise ParameterOutOfWindow(f"parameter {x} outside window {structure.size}")


def holds_conj(facts: frozenset, conj: Conj) -> bool:
    # Atoms on repeated-entry tuples are absent from ``facts``, so they are false.
    return all(((lit.rel, lit.args) in facts) == lit.positive for lit in conj.literals)


def evaluate(structure: WindowStructure, formula) -> bool:
    """Truth value of a quantifier-free formula with parameters in the window."""
    _check_formula(structure, formula)
    if isinstance(formula, Disj):
        return any(holds_conj(structure.facts, t) for t in formula.terms)
    return holds_conj(structure.facts, formula)


# ``eval`` in the operation table; the builtin name is avoided.
eval_formula = evaluate

_ATOM = re.compile(r"^\s*(!|~|not\s+)?\s*([^\s(]+)\s*\(([^)]*)\)\s*$")


def parse_formula(text: str):
    """Parse ``"E(0,1) & !E(1,2) | Red(0)"``; ``true``/``false`` are constants."""
    text = text.strip()
    terms = []
    for chunk in text.split("|"):
        chunk = chunk.strip()
        if chunk in ("true", ""):
            terms.append(Conj())
            continue
        if chunk == "false":
            continue
        lits = []
        for part in chunk.split("&"):
            m = _ATOM.match(part)
            if not m:
                raise ValueError(f"cannot parse literal {part!r}")
            args = tuple(int(a) for a in m.group(3).split(",") if a.strip())
            lits.append(Literal(m.group(2), args, not m.group(1)))
        terms.append(Conj(frozenset(lits)))
    if len(terms) == 1:
        return terms[0]
    return Disj(tuple(terms))


# ---------------------------------------------------------------------------
# non-redundant expansion


def set_partitions(n: int) -> list[tuple[int, ...]]:
    """Equivalence relations on ``range(n)`` as restricted growth strings."""
    out = []

    def rec(prefix, top):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for c in range(top + 2):
            rec(prefix + [c], max(top, c))

    if n == 0:
        return [()]
    rec([0], 0)
    return out


def nr_name(rel: str, pattern: Sequence[int]) -> str:
    return f"{rel}[{''.join(map(str, pattern))}]"


@dataclass(frozen=True)
class NrTranslator:
    source: Language
    target: Language
    # target name -> (source name, pattern)
    table: Mapping[str, tuple[str, tuple[int, ...]]] = field(hash=False, compare=False)

    def forward(self, structure: WindowStructure) -> WindowStructure:
        """L-structure (repeated entries allowed) to its non-redundant expansion."""
        if structure.language != self.source:
            raise ValueError("structure is not over the source language")
        facts = []
        for rel, t in structure.facts:
            labels: dict[int, int] = {}
            pattern = []
            for x in t:
                labels.setdefault(x, len(labels))
                pattern.append(labels[x])
            distinct = tuple(dict.fromkeys(t))
            facts.append((nr_name(rel, pattern), distinct))
        return WindowStructure(self.target, structure.size, frozenset(facts), GENERAL)

    def backward(self, structure: WindowStructure) -> WindowStructure:
        if structure.language != self.target:
            raise ValueError("structure is not over the expanded language")
        facts = []
        for rel, t in structure.facts:
            src, pattern = self.table[rel]
            facts.append((src, tuple(t[c] for c in pattern)))
        return WindowStructure(self.source, structure.size, frozenset(facts), RAW)


def nonredundant_expansion(language: Language) -> tuple[Language, NrTranslator]:
    """The language with one symbol per (relation, repetition pattern)."""
    rels = []
    table = {}
    for name, arity in language.relations:
        for pattern in set_partitions(arity):
            new = nr_name(name, pattern)
            rels.append((new, max(pattern) + 1))
            table[new] = (name, pattern)
    target = Language(tuple(rels))
    return target, NrTranslator(language, target, table)
