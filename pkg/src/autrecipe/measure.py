"""Invariant measures at window scale.

A ``WindowMeasure`` over a canonical base ``M`` stores, for each base relation
``p`` of arity ``m`` up to the horizon, the exact distribution of the complete
diagram (over the extra language) induced on any tuple realizing ``p``.
Projectivity and invariance together say: the marginal of the table of ``p``
on an injective index tuple ``I`` is the table of ``p`` restricted to ``I``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .canonical import CanonicalPresentation, coarsening, is_sub_can
from .lang import Conj, Disj, Language, Literal, holds_conj, injective_tuples, restrict_facts

Dist = Mapping[frozenset, Fraction]


class AdditivityViolation(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class BaseMassViolation(AdditivityViolation):
    pass


class NegativeMass(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NotInvariant(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NoRealization(ValueError):
    pass


class HorizonMismatch(ValueError):
    pass


class NotConcentrated(ValueError):
    pass


class ZeroMassType(UserWarning):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def marginal(dist: Dist, index) -> dict:
    out: dict = {}
    for d, w in dist.items():
        r = restrict_facts(d, index)
        out[r] = out.get(r, 0) + w
    return {d: w for d, w in out.items() if w}


def event_prob(dist: Dist, formula) -> Fraction:
    terms = formula.terms if isinstance(formula, Disj) else (formula,)
    return sum((w for d, w in dist.items() if any(holds_conj(d, t) for t in terms)), Fraction(0))


def fmt_diagram(d: Iterable) -> str:
    return "{" + ", ".join(f"{r}({','.join(map(str, t))})" for r, t in sorted(d)) + "}"


@dataclass(frozen=True)
class WindowMeasure:
    base: CanonicalPresentation
    extra: Language
    horizon: int
    tables: Mapping[str, Dist] = field(hash=False, compare=False)
    base_ref: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.horizon > self.base.max_arity:
            raise ValueError(f"horizon {self.horizon} exceeds base arity {self.base.max_arity}")
        clash = set(self.extra.names) & set(self.base.language.names)
        if clash:
            raise ValueError(f"extra language shares symbols with the base: {sorted(clash)}")
        clean = {}
        for p in self.base_types():
            if p not in self.tables:
                raise ValueError(f"no table for base relation {p}")
            dist = {frozenset(d): _frac(w) for d, w in self.tables[p].items() if w}
            if any(w < 0 for w in dist.values()):
                raise NegativeMass(f"negative entry in the table of {p}")
            if sum(dist.values()) != 1:
                raise ValueError(f"table of {p} sums to {sum(dist.values())}")
            clean[p] = dist
        object.__setattr__(self, "tables", clean)

    def base_types(self) -> list[str]:
        return [r for r, k in self.base.language if k <= self.horizon]

    def prob(self, p: str, formula) -> Fraction:
        return event_prob(self.tables[p], formula)

    def same_tables(self, other: "WindowMeasure") -> bool:
        return self.tables == other.tables and self.horizon == other.horizon


# ---------------------------------------------------------------------------
# invariance


@dataclass
class InvarianceReport:
    ok: bool
    witness: dict | None = None

    def summary(self) -> str:
        if self.ok:
            return "invariant and projective"
        w = self.witness
        return (
            f"table of {w['type']} marginalised on {w['index']} disagrees with the table of {w['restricted']}"
            f" at {fmt_diagram(w['diagram'])}: {w['lhs']} vs {w['rhs']}"
        )


def check_invariance(measure: WindowMeasure) -> InvarianceReport:
    base = measure.base
    for p in measure.base_types():
        m = base.language.arity(p)
        for index in injective_tuples(m, m):
            if index == tuple(range(m)):
                continue
            q = base.table[(p, index)]
            lhs = marginal(measure.tables[p], index)
            rhs = measure.tables[q]
            if lhs != rhs:
                for d in sorted(set(lhs) | set(rhs), key=sorted):
                    if lhs.get(d, 0) != rhs.get(d, 0):
                        return InvarianceReport(False, {
                            "type": p, "index": index, "restricted": q, "diagram": d,
                            "lhs": lhs.get(d, Fraction(0)), "rhs": rhs.get(d, Fraction(0)),
                        })
    return InvarianceReport(True)


# ---------------------------------------------------------------------------
# construction from values on the pi-system


def _lookup(assign):
    if callable(assign):
        return lambda p, conj: _frac(assign(p, conj))
    table = {}
    for (p, conj), v in assign.items():
        table[(p, conj if isinstance(conj, Conj) else Conj(frozenset(conj)))] = _frac(v)

    def get(p, conj):
        return table.get((p, conj))

    get.partial_keys = list(table)
    get.table = table
    return get


def from_pi_system(
    assign,
    base: CanonicalPresentation,
    extra: Language,
    horizon: int,
    check_cap: int = 9,
) -> WindowMeasure:
    """Validate values on conjunctions of literals and return the window measure.

    ``assign`` is either a callable ``(base_relation, Conj) -> value`` or a
    mapping from ``(base_relation, Conj)`` to values.  With a mapping, missing
    complete diagrams count as 0 and only the listed partial conjunctions are
    checked for additivity; with a callable every partial conjunction is
    checked while the window has at most ``check_cap`` slots.
    """
    get = _lookup(assign)
    is_map = not callable(assign)
    tables = {}
    for p, m in base.language:
        if m > horizon:
            continue
        slots = extra.slots(m)
        complete = {}
        for bits in itertools.product((True, False), repeat=len(slots)):
            facts = frozenset(s for s, b in zip(slots, bits) if b)
            conj = Conj.from_diagram(facts, slots)
            v = get(p, conj)
            v = Fraction(0) if v is None else v
            if v < 0:
                raise NegativeMass(f"{p}: {conj} has mass {v}", {"type": p, "formula": conj, "value": v})
            complete[bits] = v
        total = sum(complete.values(), Fraction(0))
        top = get(p, Conj())
        if top is None:
            top = total
        if top != 1:
            raise BaseMassViolation(
                f"{p}: the base formula has mass {top}, not 1", {"type": p, "formula": Conj(), "value": top}
            )
        if is_map:
            _check_listed(p, slots, complete, get)
        elif len(slots) <= check_cap:
            _check_all(p, slots, complete, get)
        tables[p] = {frozenset(s for s, b in zip(slots, bits) if b): v for bits, v in complete.items() if v}
    measure = WindowMeasure(base, extra, horizon, tables)
    report = check_invariance(measure)
    if not report.ok:
        raise NotInvariant(report.summary(), report.witness)
    return measure


def _conj_of(slots, trits) -> Conj:
    return Conj(frozenset(
        Literal(r, t, v)
        for (r, t), v in zip(slots, trits) if v is not None
    ))


def _completion_sum(slots, complete, trits) -> Fraction:
    free = [i for i, v in enumerate(trits) if v is None]
    total = Fraction(0)
    for bits in itertools.product((True, False), repeat=len(free)):
        full = list(trits)
        for i, b in zip(free, bits):
            full[i] = b
        total += complete[tuple(full)]
    return total


def _descend(p, slots, complete, get, trits):
    """From a conjunction whose value disagrees with its completions, find (zeta, eta)."""
    while True:
        free = [i for i, v in enumerate(trits) if v is None]
        i = free[0]
        pos, neg = list(trits), list(trits)
        pos[i], neg[i] = True, False
        here = get(p, _conj_of(slots, trits))
        a = get(p, _conj_of(slots, pos))
        b = get(p, _conj_of(slots, neg))
        a = _completion_sum(slots, complete, pos) if a is None else a
        b = _completion_sum(slots, complete, neg) if b is None else b
        if here != a + b:
            zeta = _conj_of(slots, trits)
            eta = Literal(*slots[i])
            raise AdditivityViolation(
                f"{p}: value of {zeta} is {here} but splitting on {eta} gives {a} + {b}",
                {"type": p, "zeta": zeta, "eta": eta, "value": here, "split": (a, b)},
            )
        trits = pos if a != _completion_sum(slots, complete, pos) else neg


def _check_all(p, slots, complete, get):
    for trits in itertools.product((True, False, None), repeat=len(slots)):
        if None not in trits:
            continue
        v = get(p, _conj_of(slots, trits))
        if v != _completion_sum(slots, complete, trits):
            _descend(p, slots, complete, get, trits)


def _check_listed(p, slots, complete, get):
    index = {s: i for i, s in enumerate(slots)}
    for q, conj in get.partial_keys:
        if q != p:
            continue
        trits = [None] * len(slots)
        for lit in conj.literals:
            slot = (lit.rel, lit.args)
            if slot not in index:
                raise ValueError(f"{lit} is not a slot of a window of size {base_arity(slots)}")
            if trits[index[slot]] is not None and trits[index[slot]] != lit.positive:
                trits = None
                break
            trits[index[slot]] = lit.positive
        if trits is None:
            if get(p, conj):
                raise AdditivityViolation(f"{p}: contradictory {conj} has positive mass", {"type": p, "zeta": conj})
            continue
        trits = tuple(trits)
        if None not in trits:
            continue
        if get(p, conj) != _completion_sum(slots, complete, trits):
            _descend(p, slots, complete, get, trits)


def base_arity(slots) -> int:
    return 1 + max((x for _, t in slots for x in t), default=-1)


def product_measure(base: CanonicalPresentation, extra: Language, horizon: int, probs: Mapping[str, Fraction]):
    """Independent atoms: each fact of relation ``R`` holds with probability ``probs[R]``."""

    def assign(p, conj):
        if conj.is_contradictory():
            return Fraction(0)
        out = Fraction(1)
        for lit in conj.literals:
            pr = _frac(probs.get(lit.rel, 0))
            out *= pr if lit.positive else 1 - pr
        return out

    return from_pi_system(assign, base, extra, horizon)


# ---------------------------------------------------------------------------
# restriction along an embedding of canonical structures


def restrict_measure(mu: WindowMeasure, m0: CanonicalPresentation, embedding: Mapping[str, str] | None = None) -> WindowMeasure:
    if embedding is None:
        res = is_sub_can(m0, mu.base)
        if not res.ok:
            raise NoRealization(f"not canonically contained: {res.witness}")
        embedding = res.embedding
    report = check_invariance(mu)
    if not report.ok:
        raise NotInvariant(report.summary(), report.witness)
    tables = {}
    for p, m in m0.language:
        if m > mu.horizon:
            continue
        image = embedding.get(p)
        if image is None or image not in mu.tables:
            raise NoRealization(f"{p} is not realized in the larger structure")
        tables[p] = dict(mu.tables[image])
    return WindowMeasure(m0, mu.extra, min(mu.horizon, m0.max_arity), tables)


# ---------------------------------------------------------------------------
# merging with a measure concentrated on a finer canonical structure


@dataclass(frozen=True)
class ConcentratedBaseMeasure:
    """Distribution of the ``inner`` relation on tuples of each ``outer`` type."""

    outer: CanonicalPresentation
    inner: CanonicalPresentation
    horizon: int
    tables: Mapping[str, Mapping[str, Fraction]] = field(hash=False, compare=False)
    coarse: Mapping[str, str] = field(default=None, hash=False, compare=False)

    def __post_init__(self):
        coarse = self.coarse if self.coarse is not None else coarsening(self.inner, self.outer)
        object.__setattr__(self, "coarse", dict(coarse))
        clean = {}
        for q, m in self.outer.language:
            if m > self.horizon:
                continue
            row = {p: _frac(w) for p, w in self.tables.get(q, {}).items() if w}
            for p in row:
                if p not in self.inner.language or self.coarse.get(p) != q:
                    raise NotConcentrated(f"{p} does not refine {q}")
            if any(w < 0 for w in row.values()) or sum(row.values()) != 1:
                raise ValueError(f"row of {q} is not a probability vector")
            clean[q] = row
        object.__setattr__(self, "tables", clean)

    @property
    def language(self) -> Language:
        return self.inner.language.upto(self.horizon)

    def as_window_measure(self) -> WindowMeasure:
        tables = {q: {self.inner.diagram(p): w for p, w in row.items()} for q, row in self.tables.items()}
        return WindowMeasure(self.outer, self.language, self.horizon, tables)

    @classmethod
    def from_window_measure(cls, wm: WindowMeasure, inner: CanonicalPresentation, coarse=None):
        coarse = coarse if coarse is not None else coarsening(inner, wm.base)
        lookup = {inner.diagram(p): p for p, k in inner.language if k <= wm.horizon}
        tables = {}
        for q, dist in wm.tables.items():
            row = {}
            for d, w in dist.items():
                p = lookup.get(d)
                if p is None or coarse.get(p) != q:
                    raise NotConcentrated(f"mass {w} on {fmt_diagram(d)} outside the age of the inner structure")
                row[p] = w
            tables[q] = row
        return cls(wm.base, inner, wm.horizon, tables, coarse)


def merge(mu: WindowMeasure, nu: ConcentratedBaseMeasure) -> WindowMeasure:
    if mu.horizon != nu.horizon:
        raise HorizonMismatch(f"horizons differ: {mu.horizon} vs {nu.horizon}")
    if mu.base.language != nu.inner.language:
        raise NotConcentrated("nu is not concentrated on the base structure of mu")
    extra = nu.language.union(mu.extra)
    tables = {}
    for q, row in nu.tables.items():
        out = {}
        for p, w in row.items():
            dp = nu.inner.diagram(p)
            for d, v in mu.tables[p].items():
                out[dp | d] = out.get(dp | d, 0) + w * v
        tables[q] = out
    return WindowMeasure(nu.outer, extra, mu.horizon, tables)


def describe_merge(mu: WindowMeasure, nu: ConcentratedBaseMeasure, q: str, formula) -> Fraction:
    """Sum over the inner types ``p`` refining ``q`` of ``nu(p) * mu^p(formula)``."""
    if mu.horizon != nu.horizon:
        raise HorizonMismatch(f"horizons differ: {mu.horizon} vs {nu.horizon}")
    terms = formula.terms if isinstance(formula, Disj) else (formula,)
    total = Fraction(0)
    for p, w in nu.tables[q].items():
        dp = nu.inner.diagram(p)
        mu_p = sum((v for d, v in mu.tables[p].items() if any(holds_conj(dp | d, t) for t in terms)), Fraction(0))
        total += w * mu_p
    return total


def decompose(eta: WindowMeasure, inner: CanonicalPresentation, coarse=None):
    """Split ``eta`` into (mu over ``inner``, nu, flagged zero-mass types)."""
    coarse = coarse if coarse is not None else coarsening(inner, eta.base)
    inner_names = set(inner.language.names)
    extra_l = Language(tuple(r for r in eta.extra.relations if r[0] not in inner_names))
    lookup = {inner.diagram(p): p for p, k in inner.language if k <= eta.horizon}
    nu_tables: dict = {}
    joint: dict = {}
    for q, dist in eta.tables.items():
        row = nu_tables.setdefault(q, {})
        for d, w in dist.items():
            dm = frozenset(f for f in d if f[0] in inner_names)
            dl = d - dm
            p = lookup.get(dm)
            if p is None or coarse.get(p) != q:
                raise NotConcentrated(f"mass {w} on {fmt_diagram(dm)} outside the age of the inner structure")
            row[p] = row.get(p, 0) + w
            jp = joint.setdefault(p, {})
            jp[dl] = jp.get(dl, 0) + w
    nu = ConcentratedBaseMeasure(eta.base, inner, eta.horizon, nu_tables, coarse)
    mu_tables, flagged = {}, []
    for p, k in inner.language:
        if k > eta.horizon:
            continue
        mass = nu.tables[coarse[p]].get(p, Fraction(0))
        if mass == 0:
            flagged.append(p)
            mu_tables[p] = {frozenset(): Fraction(1)}
            continue
        mu_tables[p] = {d: w / mass for d, w in joint[p].items() if w}
    if flagged:
        warnings.warn(f"zero-mass types given the trivial expansion: {', '.join(flagged)}", ZeroMassType, stacklevel=2)
    mu = WindowMeasure(inner, extra_l, eta.horizon, mu_tables)
    return mu, nu, flagged
