"""Ages: finite classes of window structures up to isomorphism, and their
hereditary, joint-embedding and strong-amalgamation checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .lang import (
    GENERAL,
    Language,
    WindowStructure,
    canonical_key,
    relabel_facts,
    restrict_facts,
)


@dataclass(frozen=True)
class Age:
    """Isomorphism classes of structures of size ``1..size_bound``.

    ``members`` maps a canonical key to the structure in canonical form.
    """

    language: Language
    size_bound: int
    members: dict = field(hash=False, compare=False)
    mode: str = GENERAL

    @classmethod
    def from_structures(cls, language, size_bound, structures: Iterable[WindowStructure], mode=None):
        members = {}
        for s in structures:
            if s.size < 1 or s.size > size_bound:
                continue
            members.setdefault(s.key, s.canonical_form())
        if mode is None:
            mode = next(iter(members.values())).mode if members else GENERAL
        return cls(language, size_bound, members, mode)

    def __contains__(self, structure) -> bool:
        if isinstance(structure, WindowStructure):
            return structure.key in self.members
        return structure in self.members

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.sorted_members())

    def sorted_members(self) -> list[WindowStructure]:
        return [self.members[k] for k in sorted(self.members)]

    def of_size(self, m: int) -> list[WindowStructure]:
        return [self.members[k] for k in sorted(self.members) if k[0] == m]

    def contains_facts(self, size: int, facts) -> bool:
        return canonical_key(size, frozenset(facts)) in self.members

    @cached_property
    def labeled(self) -> dict[int, set[frozenset]]:
        """All labelled copies of members, grouped by size."""
        out: dict[int, set[frozenset]] = {}
        for (m, _), s in self.members.items():
            bucket = out.setdefault(m, set())
            for perm in itertools.permutations(range(m)):
                bucket.add(relabel_facts(s.facts, perm))
        return out

    def restrict_bound(self, bound: int) -> "Age":
        return Age(self.language, bound, {k: v for k, v in self.members.items() if k[0] <= bound}, self.mode)

    def __repr__(self):
        return f"Age(size_bound={self.size_bound}, members={len(self.members)})"


def induced_keys(structure: WindowStructure, max_size: int | None = None) -> set:
    """Canonical keys of every nonempty induced substructure."""
    n = structure.size
    top = n if max_size is None else min(n, max_size)
    keys = set()
    for m in range(1, top + 1):
        for sub in itertools.combinations(range(n), m):
            keys.add(canonical_key(m, restrict_facts(structure.facts, sub)))
    return keys


def age_of(generators: Iterable[WindowStructure], size_bound: int) -> Age:
    """HP-closure of the generators, truncated at ``size_bound``."""
    if size_bound < 1:
        raise ValueError("size_bound must be >= 1")
    generators = list(generators)
    if not generators:
        raise ValueError("need at least one generator")
    language = generators[0].language
    members = {}
    for g in generators:
        for m in range(1, min(g.size, size_bound) + 1):
            for sub in itertools.combinations(range(g.size), m):
                s = g.substructure(sub)
                if s.key not in members:
                    members[s.key] = s.canonical_form()
    return Age(language, size_bound, members, generators[0].mode)


# ---------------------------------------------------------------------------
# property checks


@dataclass
class AgeReport:
    hp: bool
    jep: bool
    sap: bool
    size_bound: int
    witnesses: dict = field(default_factory=dict)

    def summary(self) -> str:
        flags = ", ".join(f"{k}={'yes' if getattr(self, k) else 'no'}" for k in ("hp", "jep", "sap"))
        return f"{flags} (no counterexample up to size {self.size_bound} unless stated)"


def check_hp(age: Age):
    for key, s in sorted(age.members.items()):
        for m in range(1, s.size):
            for sub in itertools.combinations(range(s.size), m):
                if canonical_key(m, restrict_facts(s.facts, sub)) not in age.members:
                    return False, {"member": s, "subset": sub}
    return True, None


def check_jep(age: Age):
    subs = {key: induced_keys(s) for key, s in age.members.items()}
    keys = sorted(age.members)
    for i, ka in enumerate(keys):
        for kb in keys[i:]:
            if ka[0] + kb[0] > age.size_bound:
                continue
            if not any(ka in sk and kb in sk for sk in subs.values()):
                return False, {"A": age.members[ka], "B": age.members[kb]}
    return True, None


def _top_split(facts: frozenset, m: int):
    """Split facts on window m into (those using every element, the rest)."""
    top, low = [], []
    for f in facts:
        (top if len(set(f[1])) == m else low).append(f)
    return frozenset(top), frozenset(low)


class _AmalgamationIndex:
    """For each window size, the admissible top-fact sets given the lower facts."""

    def __init__(self, age: Age):
        self.age = age
        self.options: dict[int, dict[frozenset, list[frozenset]]] = {}
        for m, labeled in age.labeled.items():
            table: dict[frozenset, list[frozenset]] = {}
            for facts in labeled:
                top, low = _top_split(facts, m)
                table.setdefault(low, []).append(top)
            for v in table.values():
                v.sort(key=lambda fs: sorted(fs))
            self.options[m] = table

    def choices(self, m: int, low: frozenset):
        return self.options.get(m, {}).get(low, [])


def extensions_fixing(age: Age, base: WindowStructure, size: int) -> list[frozenset]:
    """Labelled members of ``size`` points whose first ``base.size`` points carry ``base``.

    Deduplicated up to permutations of the extra points.
    """
    a = base.size
    seen = set()
    out = []
    for facts in sorted(age.labeled.get(size, ()), key=lambda fs: sorted(fs)):
        if restrict_facts(facts, range(a)) != base.facts:
            continue
        best = None
        for perm in itertools.permutations(range(a, size)):
            full = tuple(range(a)) + perm
            cand = tuple(sorted(relabel_facts(facts, full)))
            if best is None or cand < best:
                best = cand
        if best not in seen:
            seen.add(best)
            out.append(frozenset(best))
    return out


def strong_amalgam(index: _AmalgamationIndex, a: int, b: int, c: int, fb: frozenset, fc: frozenset):
    """Find a structure on ``a + (b-a) + (c-a)`` points amalgamating B and C disjointly over A.

    B lives on ``0..b-1``; C's extra points are shifted to ``b..``.  Returns the
    fact set or ``None``.
    """
    total = b + c - a
    shift = list(range(a)) + list(range(b, total))
    facts = set(fb) | set(relabel_facts(fc, shift))
    b_extra = set(range(a, b))
    c_extra = set(range(b, total))
    subsets = [
        s
        for m in range(2, total + 1)
        for s in itertools.combinations(range(total), m)
        if b_extra & set(s) and c_extra & set(s)
    ]

    def rec(i, facts):
        if i == len(subsets):
            return facts
        s = subsets[i]
        local = restrict_facts(facts, s)
        _, low = _top_split(local, len(s))
        for top in index.choices(len(s), low):
            placed = {(r, tuple(s[x] for x in t)) for r, t in top}
            found = rec(i + 1, facts | placed)
            if found is not None:
                return found
        return None

    return rec(0, frozenset(facts))


def check_sap(age: Age, index: _AmalgamationIndex | None = None):
    index = index or _AmalgamationIndex(age)
    bound = age.size_bound
    for base in age.sorted_members():
        a = base.size
        exts = {m: extensions_fixing(age, base, m) for m in range(a + 1, bound + 1)}
        for b in range(a + 1, bound + 1):
            for c in range(b, bound + 1):
                if b + c - a > bound:
                    continue
                for i, fb in enumerate(exts[b]):
                    for j, fc in enumerate(exts[c]):
                        if b == c and j < i:
                            continue
                        if strong_amalgam(index, a, b, c, fb, fc) is None:
                            lang = age.language
                            return False, {
                                "A": base,
                                "B": WindowStructure(lang, b, fb, base.mode),
                                "C": WindowStructure(lang, c, fc, base.mode),
                            }
    return True, None


def check_age_properties(age: Age) -> AgeReport:
    hp, hw = check_hp(age)
    jep, jw = check_jep(age)
    sap, sw = check_sap(age)
    witnesses = {k: w for k, w in (("hp", hw), ("jep", jw), ("sap", sw)) if w is not None}
    return AgeReport(hp, jep, sap, age.size_bound, witnesses)


# ---------------------------------------------------------------------------
# generating families


def all_structures(language: Language, n: int, symmetric: Sequence[str] = ()) -> Iterable[frozenset]:
    """Every labelled fact set on ``n`` points.

    Relations named in ``symmetric`` are binary and decided per unordered pair.
    """
    slots = []
    for name, k in language.relations:
        if k > n:
            continue
        if name in symmetric:
            slots.extend([((name, t), (name, t[::-1])) for t in itertools.combinations(range(n), 2)])
        else:
            slots.extend([((name, t),) for t in itertools.permutations(range(n), k)])
    for bits in itertools.product((False, True), repeat=len(slots)):
        yield frozenset(f for on, group in zip(bits, slots) if on for f in group)


def enumerate_age(language: Language, size_bound: int, accept=None, symmetric: Sequence[str] = ()) -> Age:
    """Age of all structures (optionally filtered by ``accept(n, facts)``) up to ``size_bound``."""
    members = {}
    for n in range(1, size_bound + 1):
        for facts in all_structures(language, n, symmetric):
            if accept is not None and not accept(n, facts):
                continue
            key = canonical_key(n, facts)
            if key not in members:
                members[key] = WindowStructure(language, n, frozenset(key[1]))
    return Age(language, size_bound, members)
