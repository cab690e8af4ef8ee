"""Ordered and non-redundant quantifier-free types, their decomposition, and
the interval coding of a list by a point of [0, 1]."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .lang import DuplicateElement, ElementOutOfWindow, Language, WindowStructure, restrict_facts

DEFAULT_SLOT_CAP = 20


class ArityOverflow(ValueError):
    pass


class InconsistentParts(ValueError):
    def __init__(self, slot, values):
        super().__init__(f"slot {slot[0]}{slot[1]} decided both ways: {values}")
        self.slot = slot


def _check_facts(language: Language, n: int, facts, increasing: bool):
    for rel, t in facts:
        if len(t) != language.arity(rel):
            raise ValueError(f"{rel}{t}: arity mismatch")
        if any(x < 0 or x >= n for x in t):
            raise ValueError(f"{rel}{t}: variable outside x0..x{n - 1}")
        if increasing and list(t) != sorted(set(t)):
            raise ValueError(f"{rel}{t}: ordered types only use increasing tuples")
        if not increasing and len(set(t)) != len(t):
            raise ValueError(f"{rel}{t}: repeated variable")


@dataclass(frozen=True)
class OrderedQfType:
    """Complete type on increasing variable tuples; ``facts`` are the positive atoms."""

    language: Language
    n: int
    facts: frozenset = frozenset()

    def __post_init__(self):
        facts = frozenset((r, tuple(t)) for r, t in self.facts)
        object.__setattr__(self, "facts", facts)
        _check_facts(self.language, self.n, facts, increasing=True)

    @property
    def decisions(self) -> dict:
        return {s: s in self.facts for s in self.language.slots(self.n, ordered=True)}

    def top(self) -> frozenset:
        """Relations holding of the full tuple ``(x0, ..., x_{n-1})``."""
        full = tuple(range(self.n))
        return frozenset(r for r, t in self.facts if t == full)

    def project(self, language: Language) -> "OrderedQfType":
        return OrderedQfType(language, self.n, frozenset(f for f in self.facts if f[0] in language))

    def __repr__(self):
        body = ",".join(f"{r}{''.join(map(str, t))}" for r, t in sorted(self.facts)) or "-"
        return f"oqf{self.n}[{body}]"


@dataclass(frozen=True)
class NonRedundantQfType:
    """Complete type on injective variable tuples; ``facts`` are the positive atoms."""

    language: Language
    n: int
    facts: frozenset = frozenset()

    def __post_init__(self):
        facts = frozenset((r, tuple(t)) for r, t in self.facts)
        object.__setattr__(self, "facts", facts)
        _check_facts(self.language, self.n, facts, increasing=False)

    @property
    def decisions(self) -> dict:
        return {s: s in self.facts for s in self.language.slots(self.n)}

    def as_structure(self, mode="general") -> WindowStructure:
        return WindowStructure(self.language, self.n, self.facts, mode)

    def __repr__(self):
        body = ",".join(f"{r}{''.join(map(str, t))}" for r, t in sorted(self.facts)) or "-"
        return f"nqf{self.n}[{body}]"


def enumerate_ordered_types(language: Language, n: int, cap: int = DEFAULT_SLOT_CAP) -> list[OrderedQfType]:
    slots = language.slots(n, ordered=True)
    if len(slots) > cap:
        raise ArityOverflow(f"{len(slots)} slots exceed the enumeration cap {cap}")
    out = []
    for bits in itertools.product((False, True), repeat=len(slots)):
        out.append(OrderedQfType(language, n, frozenset(s for s, b in zip(slots, bits) if b)))
    return out


def enumerate_nonredundant_types(language: Language, n: int, cap: int = DEFAULT_SLOT_CAP) -> list[NonRedundantQfType]:
    slots = language.slots(n)
    if len(slots) > cap:
        raise ArityOverflow(f"{len(slots)} slots exceed the enumeration cap {cap}")
    out = []
    for bits in itertools.product((False, True), repeat=len(slots)):
        out.append(NonRedundantQfType(language, n, frozenset(s for s, b in zip(slots, bits) if b)))
    return out


def split(q: NonRedundantQfType) -> dict[tuple[int, ...], OrderedQfType]:
    """Read ``q`` along each permutation: ``p_tau`` decides ``R(j)`` as ``q`` decides ``R(tau . j)``."""
    out = {}
    for tau in itertools.permutations(range(q.n)):
        facts = frozenset(
            (r, j) for r, j in q.language.slots(q.n, ordered=True) if (r, tuple(tau[x] for x in j)) in q.facts
        )
        out[tau] = OrderedQfType(q.language, q.n, facts)
    return out


def merge(parts: Mapping[Sequence[int], OrderedQfType]) -> NonRedundantQfType:
    if not parts:
        raise ValueError("no parts to merge")
    first = next(iter(parts.values()))
    language, n = first.language, first.n
    seen: dict = {}
    for tau, p in parts.items():
        tau = tuple(tau)
        if sorted(tau) != list(range(n)) or p.n != n:
            raise ValueError(f"part {tau} is not a permutation of {n} variables")
        for r, j in language.slots(n, ordered=True):
            slot = (r, tuple(tau[x] for x in j))
            val = (r, j) in p.facts
            if seen.setdefault(slot, val) != val:
                raise InconsistentParts(slot, (not val, val))
    missing = [s for s in language.slots(n) if s not in seen]
    if missing:
        raise ValueError(f"parts leave {missing[0]} undecided")
    return NonRedundantQfType(language, n, frozenset(s for s, v in seen.items() if v))


def type_of_tuple(structure: WindowStructure, t: Sequence[int]) -> NonRedundantQfType:
    t = tuple(t)
    if len(set(t)) != len(t):
        raise DuplicateElement(f"tuple {t} repeats an element")
    for x in t:
        if not 0 <= x < structure.size:
            raise ElementOutOfWindow(f"{x} outside window {structure.size}")
    facts = restrict_facts(structure.facts, t)
    return NonRedundantQfType(structure.language, len(t), facts)


# ---------------------------------------------------------------------------
# interval coding


@dataclass(frozen=True)
class IntervalCode:
    """A finite list, or an infinite one given by ``item(i)``."""

    items: tuple = ()
    generator: Callable[[int], object] | None = None

    @classmethod
    def infinite(cls, generator: Callable[[int], object]) -> "IntervalCode":
        return cls((), generator)

    @property
    def is_infinite(self) -> bool:
        return self.generator is not None

    def item(self, i: int):
        return self.generator(i) if self.is_infinite else self.items[i]

    def index(self, y) -> int:
        y = Fraction(y)
        if not 0 <= y <= 1:
            raise ValueError(f"{y} outside [0, 1]")
        if y == 1:
            return 0
        if not self.is_infinite:
            if not self.items:
                raise ValueError("empty list has no code")
            return int(y * len(self.items))
        # 1 - 2^-i <= y < 1 - 2^-(i+1)
        i, gap = 0, 1 - y
        while gap <= Fraction(1, 2 ** (i + 1)):
            i += 1
        return i

    def interval(self, i: int) -> tuple[Fraction, Fraction]:
        if self.is_infinite:
            return 1 - Fraction(1, 2**i), 1 - Fraction(1, 2 ** (i + 1))
        n = len(self.items)
        return Fraction(i, n), Fraction(i + 1, n)


def gamma_eval(code: IntervalCode, y):
    return code.item(code.index(y))


def gamma(items: Iterable):
    code = IntervalCode(tuple(items))
    return lambda y: gamma_eval(code, y)
