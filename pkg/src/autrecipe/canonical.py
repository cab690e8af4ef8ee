"""Canonical presentations: one relation per orbit of injective tuples.

A presentation is stored through its restriction table: for every relation
``R`` of arity ``n`` and every injective index tuple ``I`` over ``range(n)``
the table names the relation holding of ``x . I`` whenever ``R(x)`` holds.
Index tuples that permute all of ``range(n)`` give the action of ``Sym(n)``
on the ``n``-ary relations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

from .ages import Age, age_of, check_hp, check_sap
from .lang import (
    CANONICAL,
    Language,
    WindowStructure,
    canonical_key,
    injective_tuples,
    relabel_facts,
    restrict_facts,
)


class NotHpClosed(ValueError):
    pass


class UnrealizedRelation(KeyError):
    pass


class IncompatibleCollection(ValueError):
    pass


Namer = Callable[[int, frozenset], str]


def default_namer(n: int, facts: frozenset) -> str:
    body = ",".join(f"{r}{''.join(map(str, t))}" for r, t in sorted(facts))
    return f"t{n}:{body or '-'}"


def faces(n1: int) -> list[tuple[int, ...]]:
    """Face ``i`` of ``range(n1)`` omits ``i`` and keeps increasing order."""
    return [tuple(k for k in range(n1) if k != i) for i in range(n1)]


def positions(inner: Sequence[int], outer: Sequence[int]) -> tuple[int, ...]:
    return tuple(outer.index(x) for x in inner)


@dataclass(frozen=True)
class CompatibleCollection:
    parts: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.parts)

    def __str__(self):
        return "⟨" + ",".join(self.parts) + "⟩"


@dataclass(frozen=True)
class CanonicalPresentation:
    language: Language
    table: Mapping = field(hash=False, compare=False)
    age: Age | None = field(default=None, hash=False, compare=False)
    # Optional: the language the relations were read off from, and the
    # labelled diagram (over that language) behind each relation.
    source: Language | None = None
    source_types: Mapping | None = field(default=None, hash=False, compare=False)

    def __post_init__(self):
        for name, k in self.language:
            for t in itertools.permutations(range(k)):
                if (name, t) not in self.table:
                    raise ValueError(f"restriction table lacks {name}{t}")

    @property
    def max_arity(self) -> int:
        return self.language.max_arity

    def restrict(self, rel: str, index: Sequence[int]) -> str:
        index = tuple(index)
        if rel not in self.language:
            raise UnrealizedRelation(rel)
        try:
            return self.table[(rel, index)]
        except KeyError:
            raise ValueError(f"{index} is not an injective index tuple for {rel}") from None

    def diagram(self, rel: str) -> frozenset:
        """Canonical-mode facts on ``range(arity)`` forced by ``rel``."""
        k = self.language.arity(rel)
        return frozenset((self.table[(rel, t)], t) for t in injective_tuples(k, k))

    def diagram_structure(self, rel: str) -> WindowStructure:
        return WindowStructure(self.language, self.language.arity(rel), self.diagram(rel), CANONICAL)

    def permuted(self, rel: str, perm: Sequence[int]) -> str:
        return self.table[(rel, tuple(perm))]

    def relation_class(self, rel: str) -> frozenset:
        k = self.language.arity(rel)
        return frozenset(self.table[(rel, p)] for p in itertools.permutations(range(k)))

    def relation_classes(self, k: int) -> list[tuple[str, ...]]:
        """Orbits of ``k``-ary relations under argument permutation, in language order."""
        seen, out = set(), []
        for r in self.language.of_arity(k):
            if r in seen:
                continue
            cls = self.relation_class(r)
            seen |= cls
            out.append(tuple(x for x in self.language.of_arity(k) if x in cls))
        return out

    @cached_property
    def signature_index(self) -> dict:
        """``(arity, lower restrictions)`` -> relations with exactly those restrictions."""
        out: dict = {}
        for r, k in self.language:
            out.setdefault((k, self.lower_signature(r)), []).append(r)
        return out

    def lower_signature(self, rel: str) -> tuple:
        k = self.language.arity(rel)
        return tuple(self.table[(rel, s)] for s in _proper_increasing(k))

    @cached_property
    def face_index(self) -> dict:
        out: dict = {}
        for r, k in self.language:
            if k >= 2:
                key = tuple(self.table[(r, f)] for f in faces(k))
                out.setdefault(key, []).append(r)
        return out

    def facts_from_assignment(self, n: int, assign: Mapping[tuple, str]) -> frozenset:
        """Expand relations chosen on increasing tuples to all injective tuples."""
        facts = []
        for t in injective_tuples(n, self.max_arity):
            s = tuple(sorted(t))
            facts.append((self.table[(assign[s], positions(t, s))], t))
        return frozenset(facts)

    def structure(self, n: int, assign: Mapping[tuple, str]) -> WindowStructure:
        return WindowStructure(self.language, n, self.facts_from_assignment(n, assign), CANONICAL)

    def is_consistent(self, assign: Mapping[tuple, str]) -> bool:
        for s, r in assign.items():
            for sub in _proper_increasing(len(s)):
                if self.table[(r, sub)] != assign[tuple(s[x] for x in sub)]:
                    return False
        return True

    def truncate(self, k: int) -> "CanonicalPresentation":
        lang = self.language.upto(k)
        table = {key: v for key, v in self.table.items() if key[0] in lang}
        age = None
        if self.age is not None:
            members = {}
            for s in self.age.sorted_members():
                f = frozenset((r, t) for r, t in s.facts if len(t) <= k)
                members.setdefault(canonical_key(s.size, f), WindowStructure(lang, s.size, f, CANONICAL))
            age = Age(lang, self.age.size_bound, {key: m.canonical_form() for key, m in members.items()}, CANONICAL)
        types = None
        if self.source_types is not None:
            types = {r: v for r, v in self.source_types.items() if r in lang}
        return CanonicalPresentation(lang, table, age, self.source, types)

    def __repr__(self):
        counts = ", ".join(f"{k}:{len(self.language.of_arity(k))}" for k in range(1, self.max_arity + 1))
        return f"CanonicalPresentation(arity counts {{{counts}}})"


def _proper_increasing(k: int) -> list[tuple[int, ...]]:
    return [s for m in range(1, k) for s in itertools.combinations(range(k), m)]


# ---------------------------------------------------------------------------
# construction


def _decision_key(language: Language, n: int, facts: frozenset):
    # True before False on each slot, so that e.g. an edge precedes a non-edge.
    return tuple(0 if s in facts else 1 for s in language.slots(n))


def canonicalize(source, max_arity: int, namer: Namer | None = None) -> CanonicalPresentation:
    """Canonical presentation of an age (HP-closed) or of a single finite structure."""
    namer = namer or default_namer
    if isinstance(source, Age):
        return _canonicalize_age(source, max_arity, namer)
    if isinstance(source, WindowStructure):
        return _canonicalize_structure(source, max_arity, namer)
    raise TypeError(f"cannot canonicalize {type(source).__name__}")


def _canonicalize_age(age: Age, k: int, namer: Namer) -> CanonicalPresentation:
    ok, witness = check_hp(age)
    if not ok:
        raise NotHpClosed(f"substructure {witness['subset']} of {witness['member']} is missing")
    if age.size_bound < k:
        raise ValueError(f"age bound {age.size_bound} is below the requested arity {k}")
    src = age.language
    names: dict[tuple, str] = {}
    rels, types = [], {}
    for m in range(1, k + 1):
        labeled = sorted(age.labeled.get(m, ()), key=lambda f: _decision_key(src, m, f))
        for facts in labeled:
            name = namer(m, facts)
            if name in types:
                raise ValueError(f"namer produced {name!r} twice")
            names[(m, facts)] = name
            types[name] = facts
            rels.append((name, m))
    language = Language(tuple(rels))
    table = {}
    for name, m in rels:
        for t in injective_tuples(m, m):
            table[(name, t)] = names[(len(t), restrict_facts(types[name], t))]
    members = {}
    for a in age.sorted_members():
        facts = frozenset(
            (names[(len(t), restrict_facts(a.facts, t))], t) for t in injective_tuples(a.size, k)
        )
        s = WindowStructure(language, a.size, facts, CANONICAL)
        members[s.key] = s.canonical_form()
    pres_age = Age(language, age.size_bound, members, CANONICAL)
    return CanonicalPresentation(language, table, pres_age, src, types)


def automorphisms(structure: WindowStructure) -> list[tuple[int, ...]]:
    if structure.size > 8:
        raise ValueError("automorphism search is exhaustive and limited to windows <= 8")
    return [
        p
        for p in itertools.permutations(range(structure.size))
        if relabel_facts(structure.facts, p) == structure.facts
    ]


def _canonicalize_structure(structure: WindowStructure, k: int, namer: Namer) -> CanonicalPresentation:
    group = automorphisms(structure)
    orbit_of: dict[tuple, int] = {}
    orbits: list[list[tuple]] = []
    for t in injective_tuples(structure.size, k):
        if t in orbit_of:
            continue
        orb = sorted({tuple(g[x] for x in t) for g in group})
        for u in orb:
            orbit_of[u] = len(orbits)
        orbits.append(orb)
    src = structure.language
    by_type: dict[tuple, list[int]] = {}
    for i, orb in enumerate(orbits):
        facts = restrict_facts(structure.facts, orb[0])
        by_type.setdefault((len(orb[0]), facts), []).append(i)
    orbit_name, types = {}, {}
    for (m, facts), idxs in by_type.items():
        base = namer(m, facts)
        for j, i in enumerate(idxs):
            orbit_name[i] = base if len(idxs) == 1 else f"{base}#{j}"
            types[orbit_name[i]] = facts
    order = sorted(
        range(len(orbits)),
        key=lambda i: (len(orbits[i][0]), _decision_key(src, len(orbits[i][0]), types[orbit_name[i]]), orbits[i][0]),
    )
    language = Language(tuple((orbit_name[i], len(orbits[i][0])) for i in order))
    table = {}
    for i, orb in enumerate(orbits):
        rep = orb[0]
        for t in injective_tuples(len(rep), len(rep)):
            table[(orbit_name[i], t)] = orbit_name[orbit_of[tuple(rep[x] for x in t)]]
    facts = frozenset((orbit_name[orbit_of[t]], t) for t in injective_tuples(structure.size, k))
    whole = WindowStructure(language, structure.size, facts, CANONICAL)
    return CanonicalPresentation(language, table, age_of([whole], structure.size), src, types)


def generate_age(pres: CanonicalPresentation, bound: int) -> Age:
    """All canonical-mode structures up to ``bound`` consistent with the restriction table.

    Structures grow one point at a time; each new increasing tuple picks any
    relation whose lower restrictions match what is already there.
    """
    k = pres.max_arity
    index = pres.signature_index
    layer: dict = {(): {}}
    members: dict = {}
    for n in range(1, bound + 1):
        nxt: dict = {}
        for assign in layer.values():
            new = [s for m in range(1, min(n, k) + 1) for s in itertools.combinations(range(n), m) if s[-1] == n - 1]

            def rec(i, cur):
                if i == len(new):
                    facts = pres.facts_from_assignment(n, cur)
                    key = canonical_key(n, facts)
                    if key not in nxt:
                        nxt[key] = dict(cur)
                    return
                s = new[i]
                sig = tuple(cur[tuple(s[x] for x in sub)] for sub in _proper_increasing(len(s)))
                for r in index.get((len(s), sig), ()):
                    cur[s] = r
                    rec(i + 1, cur)
                cur.pop(s, None)

            rec(0, dict(assign))
        for key, assign in nxt.items():
            members[key] = WindowStructure(pres.language, n, frozenset(key[1]), CANONICAL)
        layer = nxt
        if not layer:
            break
    return Age(pres.language, bound, members, CANONICAL)


def with_generated_age(pres: CanonicalPresentation, bound: int) -> CanonicalPresentation:
    return CanonicalPresentation(pres.language, pres.table, generate_age(pres, bound), pres.source, pres.source_types)


# ---------------------------------------------------------------------------
# queries


def restrict_relation(pres: CanonicalPresentation, rel: str, index: Sequence[int]) -> str:
    return pres.restrict(rel, index)


def is_compatible(pres: CanonicalPresentation, parts: Sequence[str]) -> bool:
    n1 = len(parts)
    fs = faces(n1)
    for i in range(n1):
        for j in range(i + 1, n1):
            overlap = tuple(x for x in range(n1) if x not in (i, j))
            if not overlap:
                continue
            if pres.table[(parts[i], positions(overlap, fs[i]))] != pres.table[(parts[j], positions(overlap, fs[j]))]:
                return False
    return True


def enumerate_compatible(pres: CanonicalPresentation, arity: int) -> list[CompatibleCollection]:
    if arity < 2:
        raise ValueError("compatible collections have arity >= 2")
    n = arity - 1
    rels = pres.language.of_arity(n)
    fs = faces(arity)
    out = []

    def rec(parts):
        i = len(parts)
        if i == arity:
            out.append(CompatibleCollection(tuple(parts)))
            return
        for r in rels:
            good = True
            for j in range(i):
                overlap = tuple(x for x in range(arity) if x not in (i, j))
                if overlap and pres.table[(r, positions(overlap, fs[i]))] != pres.table[(parts[j], positions(overlap, fs[j]))]:
                    good = False
                    break
            if good:
                rec(parts + [r])

    rec([])
    return out


def extensions_of(pres: CanonicalPresentation, coll: CompatibleCollection | Sequence[str]) -> list[str]:
    parts = tuple(coll.parts if isinstance(coll, CompatibleCollection) else coll)
    for r in parts:
        if r not in pres.language:
            raise UnrealizedRelation(r)
    if not is_compatible(pres, parts):
        raise IncompatibleCollection(f"⟨{','.join(parts)}⟩ is not compatible")
    return list(pres.face_index.get(parts, ()))


@dataclass
class FreeReport:
    free: bool
    bound: int
    witness: CompatibleCollection | None = None

    def summary(self) -> str:
        if self.free:
            return f"free up to arity {self.bound}"
        return f"not free: {self.witness} has no extension"


def is_free(pres: CanonicalPresentation, up_to: int | None = None) -> FreeReport:
    bound = pres.max_arity if up_to is None else min(up_to, pres.max_arity)
    for n1 in range(2, bound + 1):
        for coll in enumerate_compatible(pres, n1):
            if not pres.face_index.get(coll.parts):
                return FreeReport(False, bound, coll)
    return FreeReport(True, bound)


def fresh_name(parts: Sequence[str]) -> str:
    return "P<" + ",".join(parts) + ">"


def free_completion(pres: CanonicalPresentation, max_arity: int, age_bound: int | None = None) -> CanonicalPresentation:
    """Adjoin one fresh relation per unrealized compatible collection, arity by arity."""
    if max_arity > pres.max_arity:
        raise ValueError(f"presentation carries relations only up to arity {pres.max_arity}")
    base = pres.truncate(max_arity) if max_arity < pres.max_arity else pres
    rels = list(base.language.of_arity(1))
    table = {key: v for key, v in base.table.items() if base.language.arity(key[0]) == 1}
    types = dict(base.source_types) if base.source_types is not None else None
    rels_with_arity = [(r, 1) for r in rels]
    for n1 in range(2, max_arity + 1):
        current = CanonicalPresentation(Language(tuple(rels_with_arity)), table)
        realized = [r for r in base.language.of_arity(n1)]
        for r in realized:
            for t in injective_tuples(n1, n1):
                table[(r, t)] = base.table[(r, t)]
        unrealized = [c for c in enumerate_compatible(current, n1) if not base.face_index.get(c.parts)]
        fresh = {c.parts: fresh_name(c.parts) for c in unrealized}
        clash = set(fresh.values()) & set(base.language.names)
        if clash:
            raise ValueError(f"fresh relation names collide with existing ones: {sorted(clash)}")
        fs = faces(n1)
        for parts, name in fresh.items():
            for t in injective_tuples(n1, n1):
                if len(t) == n1:
                    moved = []
                    for k in range(n1):
                        face_k = tuple(x for pos, x in enumerate(t) if pos != k)
                        src = t[k]
                        moved.append(current.table[(parts[src], positions(face_k, fs[src]))])
                    moved = tuple(moved)
                    if moved not in fresh:
                        raise AssertionError(f"permuted collection {moved} is not unrealized")
                    table[(name, t)] = fresh[moved]
                else:
                    i = min(x for x in range(n1) if x not in t)
                    table[(name, t)] = current.table[(parts[i], positions(t, fs[i]))]
            if types is not None and all(p in types for p in parts):
                lifted = set()
                for i, p in enumerate(parts):
                    lifted |= relabel_facts(types[p], fs[i])
                types[name] = frozenset(lifted)
        rels_with_arity += [(r, n1) for r in realized] + [(fresh[c.parts], n1) for c in unrealized]
    language = Language(tuple(rels_with_arity))
    out = CanonicalPresentation(language, table, None, base.source, types)
    bound = max(max_arity, age_bound if age_bound is not None else (pres.age.size_bound if pres.age else max_arity))
    return with_generated_age(out, bound)


@dataclass
class SubCanResult:
    ok: bool
    embedding: dict = field(default_factory=dict)
    witness: object = None

    def __bool__(self):
        return self.ok


def is_sub_can(m0: CanonicalPresentation, m1: CanonicalPresentation) -> SubCanResult:
    """Search for a relation embedding ``L0 -> L1`` commuting with restriction.

    When both presentations carry ages, members of ``m0`` are also mapped and
    looked up in ``m1``'s age (up to the smaller size bound).
    """
    k = m0.max_arity
    if k > m1.max_arity:
        return SubCanResult(False, witness=f"arity {k} exceeds {m1.max_arity}")
    reps = [cls[0] for j in range(1, k + 1) for cls in m0.relation_classes(j)]
    first_dead_end: list = []

    def candidates(r, iota):
        j = m0.language.arity(r)
        lower = [t for t in injective_tuples(j, j - 1)]
        opts = []
        for s in m1.language.of_arity(j):
            if s in used(iota):
                continue
            if all(iota[m0.table[(r, t)]] == m1.table[(s, t)] for t in lower):
                opts.append(s)
        opts.sort(key=lambda s: s != r)
        return opts

    def used(iota):
        return set(iota.values())

    def assign(r, s, iota):
        j = m0.language.arity(r)
        new = dict(iota)
        taken = used(iota)
        for p in itertools.permutations(range(j)):
            a, b = m0.table[(r, p)], m1.table[(s, p)]
            if a in new:
                if new[a] != b:
                    return None
            else:
                if b in taken:
                    return None
                new[a] = b
                taken.add(b)
        return new

    def rec(i, iota):
        if i == len(reps):
            return iota
        r = reps[i]
        for s in candidates(r, iota):
            new = assign(r, s, iota)
            if new is None:
                continue
            found = rec(i + 1, new)
            if found is not None:
                return found
        if not first_dead_end:
            first_dead_end.append(r)
        return None

    iota = rec(0, {})
    if iota is None:
        r = first_dead_end[0]
        return SubCanResult(False, witness=_relation_witness(m0, r))
    if m0.age is not None and m1.age is not None:
        bound = min(m0.age.size_bound, m1.age.size_bound)
        for s in m0.age.sorted_members():
            if s.size > bound:
                continue
            image = frozenset((iota[r], t) for r, t in s.facts)
            if canonical_key(s.size, image) not in m1.age.members:
                return SubCanResult(False, iota, s)
    return SubCanResult(True, iota)


@dataclass(frozen=True)
class RelationWitness:
    relation: str
    diagram: WindowStructure
    source_type: frozenset | None = None

    def __str__(self):
        extra = ""
        if self.source_type is not None:
            extra = " [" + ", ".join(f"{r}{t}" for r, t in sorted(self.source_type)) + "]"
        return f"{self.relation}{extra}"


def _relation_witness(pres: CanonicalPresentation, rel: str) -> RelationWitness:
    src = pres.source_types.get(rel) if pres.source_types is not None else None
    return RelationWitness(rel, pres.diagram_structure(rel), src)


def has_trivial_dcl(age_or_pres) -> tuple[bool, dict | None]:
    """Strong amalgamation of the age, which is equivalent to trivial dcl."""
    age = age_or_pres.age if isinstance(age_or_pres, CanonicalPresentation) else age_or_pres
    if age is None:
        raise ValueError("presentation carries no age")
    return check_sap(age)


def coarsening(inner: CanonicalPresentation, outer: CanonicalPresentation) -> dict[str, str]:
    """Map each relation of ``inner`` to the ``outer`` relation it refines.

    Supported when ``outer`` has a single relation per arity, when both carry
    source types with ``outer``'s source language contained in ``inner``'s, or
    when the languages coincide.
    """
    out = {}
    if all(len(outer.language.of_arity(k)) == 1 for k in range(1, outer.max_arity + 1)):
        for r, k in inner.language:
            if k <= outer.max_arity:
                out[r] = outer.language.of_arity(k)[0]
        return out
    if inner.language == outer.language:
        return {r: r for r in inner.language.names}
    if inner.source_types and outer.source_types and outer.source is not None:
        lookup = {(outer.language.arity(r), f): r for r, f in outer.source_types.items()}
        for r, k in inner.language:
            reduct = frozenset(f for f in inner.source_types[r] if f[0] in outer.source)
            if (k, reduct) not in lookup:
                raise ValueError(f"{r} has no counterpart in the outer presentation")
            out[r] = lookup[(k, reduct)]
        return out
    raise ValueError("cannot relate the two presentations")
