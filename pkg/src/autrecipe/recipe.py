"""Recipes: step functions on subset-indexed unit cubes that build random structures.

A step function of arity ``k`` reads one coordinate per subset of ``range(k)``;
on a window, the tuple ``a`` feeds coordinate ``I`` with the array value at the
set ``{a[i] : i in I}``.  A relation ``R`` of arity ``k`` holds of ``a`` when
``R(x0, ..., x_{k-1})`` belongs to the ordered type returned for ``a``.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
from functools import lru_cache
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .canonical import (
    CanonicalPresentation,
    extensions_of,
    faces,
    is_free,
    is_sub_can,
    positions,
)
from .lang import GENERAL, Language, WindowStructure, injective_tuples
from .measure import WindowMeasure
from .qftypes import IntervalCode, OrderedQfType

DEFAULT_CELL_CAP = 10**6
DEFAULT_MAX_WINDOW = 8


class WindowTooLarge(ValueError):
    pass


class BaseRealizationMissing(ValueError):
    pass


class GridExplosion(ValueError):
    pass


class NotFree(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NotACompletion(ValueError):
    pass


class NotEquivariant(ValueError):
    """A base relation is moved by a permutation that fixes its faces, so a shared coordinate cannot choose it."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NotAgreeingWithCM(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


@lru_cache(maxsize=None)
def coords(k: int) -> tuple[tuple[int, ...], ...]:
    """Subsets of ``range(k)``, by size then lexicographically."""
    return tuple(s for m in range(k + 1) for s in itertools.combinations(range(k), m))


@dataclass(frozen=True)
class StepFunction:
    arity: int
    language: Language
    grid: Mapping[tuple, tuple] = field(hash=False, compare=False)
    cells: Mapping[tuple, OrderedQfType] = field(hash=False, compare=False)

    def __post_init__(self):
        cs = coords(self.arity)
        grid = {}
        for c in cs:
            br = tuple(Fraction(b) for b in self.grid.get(c, ()))
            if any(not 0 < b < 1 for b in br) or any(x >= y for x, y in zip(br, br[1:])):
                raise ValueError(f"breakpoints on {c} must increase strictly inside (0,1): {br}")
            grid[c] = br
        extra = set(self.grid) - set(cs)
        if extra:
            raise ValueError(f"coordinates {sorted(extra)} are not subsets of range({self.arity})")
        object.__setattr__(self, "grid", grid)
        shape = [len(grid[c]) + 1 for c in cs]
        cells = dict(self.cells)
        expected = 1
        for s in shape:
            expected *= s
        if len(cells) != expected or any(len(key) != len(cs) or any(not 0 <= i < s for i, s in zip(key, shape)) for key in cells):
            raise ValueError(f"cells must cover the {expected} grid cells exactly once")
        for v in cells.values():
            if v.n != self.arity:
                raise ValueError("cell value has the wrong number of variables")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def constant(cls, arity: int, language: Language, value: OrderedQfType | None = None):
        value = value or OrderedQfType(language, arity)
        return cls(arity, language, {}, {tuple(0 for _ in coords(arity)): value})

    @classmethod
    def from_rule(cls, arity: int, language: Language, grid: Mapping, rule: Callable[[dict], OrderedQfType]):
        """Tabulate ``rule`` (called with a representative point per cell)."""
        cs = coords(arity)
        grid = {c: tuple(sorted(Fraction(b) for b in grid.get(c, ()))) for c in cs}
        cells = {}
        for key in itertools.product(*(range(len(grid[c]) + 1) for c in cs)):
            point = {c: interval_of(grid[c], i)[0] for c, i in zip(cs, key)}
            cells[key] = rule(point)
        return cls(arity, language, grid, cells)

    @property
    def coordinates(self) -> list[tuple]:
        return coords(self.arity)

    def locate(self, point: Mapping[tuple, Fraction]) -> tuple:
        return tuple(_index(self.grid[c], point[c]) for c in self.coordinates)

    def __call__(self, point: Mapping[tuple, Fraction]) -> OrderedQfType:
        return self.cells[self.locate(point)]

    def cell_volume(self, key) -> Fraction:
        v = Fraction(1)
        for c, i in zip(self.coordinates, key):
            lo, hi = interval_of(self.grid[c], i)
            v *= hi - lo
        return v

    def refine(self, grid: Mapping[tuple, Sequence]) -> "StepFunction":
        merged = {c: tuple(sorted(set(self.grid[c]) | {Fraction(b) for b in grid.get(c, ())})) for c in self.coordinates}
        return StepFunction.from_rule(self.arity, self.language, merged, self)

    @cached_property
    def _tops(self) -> dict:
        return {key: v.top() for key, v in self.cells.items()}

    @cached_property
    def _threshold_cache(self) -> dict:
        return {}

    def _thresholds(self, bits: int) -> tuple:
        # y = h / 2^bits lies at or above breakpoint b exactly when h >= ceil(b * 2^bits)
        if bits in self._threshold_cache:
            return self._threshold_cache[bits]
        scale = 2**bits
        out = self._threshold_cache[bits] = tuple(tuple(-((-b.numerator * scale) // b.denominator) for b in self.grid[c]) for c in self.coordinates)
        return out

    def top_at_raw(self, raws: Sequence[int], bits: int) -> frozenset:
        """Top relations at the point whose coordinates are ``raw / 2^bits``, in coordinate order."""
        key = tuple(bisect.bisect_right(th, h) for th, h in zip(self._thresholds(bits), raws))
        return self._tops[key]


def interval_of(breaks: Sequence[Fraction], i: int) -> tuple[Fraction, Fraction]:
    lo = breaks[i - 1] if i > 0 else Fraction(0)
    hi = breaks[i] if i < len(breaks) else Fraction(1)
    return lo, hi


def _index(breaks, y) -> int:
    if y == 1:
        return len(breaks)
    return bisect.bisect_right(breaks, y)


@dataclass(frozen=True)
class SymRecipe:
    language: Language
    functions: Mapping[int, StepFunction] = field(hash=False, compare=False)

    def __post_init__(self):
        for k in {a for _, a in self.language}:
            if k not in self.functions:
                raise ValueError(f"no function for arity {k}")
        for k, f in self.functions.items():
            if f.arity != k or f.language != self.language:
                raise ValueError(f"function for arity {k} does not match the recipe")

    @property
    def max_arity(self) -> int:
        return max(self.functions, default=0)

    def function_for(self, t, realization=None) -> StepFunction:
        return self.functions[len(t)]


@dataclass(frozen=True)
class AutRecipe:
    base: CanonicalPresentation
    language: Language
    functions: Mapping[str, StepFunction] = field(hash=False, compare=False)

    def __post_init__(self):
        for p, k in self.base.language:
            if k > self.language.max_arity:
                continue
            if p not in self.functions:
                raise ValueError(f"no function for base type {p}")
        for p, f in self.functions.items():
            if p not in self.base.language or f.arity != self.base.language.arity(p) or f.language != self.language:
                raise ValueError(f"function for {p} does not match the recipe")

    @property
    def max_arity(self) -> int:
        return self.language.max_arity

    def function_for(self, t, realization) -> StepFunction:
        return self.functions[realization.relation_at(t)]


@dataclass(frozen=True)
class UniformArray:
    """Counter-based uniform array: a hash of (seed, stream, subset) per coordinate."""

    seed: int
    stream: int = 0
    bits: int = 64

    def raw(self, subset) -> int:
        """The numerator of the value at ``subset``; the denominator is ``2**bits``."""
        key = f"{self.seed}/{self.stream}/{','.join(map(str, sorted(subset)))}".encode()
        nbytes = (self.bits + 7) // 8
        h = int.from_bytes(hashlib.blake2b(key, digest_size=nbytes).digest(), "big")
        return h >> (8 * nbytes - self.bits)

    def __call__(self, subset) -> Fraction:
        return Fraction(self.raw(subset), 2**self.bits)


# ---------------------------------------------------------------------------
# sampling


def _check_window(recipe, n, realization, max_window):
    if n > max_window:
        raise WindowTooLarge(f"window {n} exceeds the configured maximum {max_window}")
    if isinstance(recipe, AutRecipe):
        if realization is None:
            raise BaseRealizationMissing("an Aut recipe needs a realization of the base on the window")
        if realization.size != n or realization.language != recipe.base.language:
            raise BaseRealizationMissing("realization does not live on the window over the base language")
        for t in injective_tuples(n, recipe.max_arity):
            if t not in realization.by_tuple or len(realization.by_tuple[t]) != 1:
                raise BaseRealizationMissing(f"tuple {t} carries no unique base relation")


def _active_tuples(recipe, n):
    return _tuple_plan(n, frozenset(k for _, k in recipe.language))


@lru_cache(maxsize=None)
def _tuple_plan(n: int, arities: frozenset) -> tuple:
    return tuple(t for t in injective_tuples(n, max(arities, default=0)) if len(t) in arities)


@lru_cache(maxsize=None)
def _hat_subsets(t: tuple) -> tuple:
    """The window subset feeding each coordinate of the tuple's hat point."""
    return tuple(tuple(sorted(t[i] for i in c)) for c in coords(len(t)))


def sample(recipe, n: int, array: UniformArray, realization: WindowStructure | None = None,
           max_window: int = DEFAULT_MAX_WINDOW) -> WindowStructure:
    """The random structure on ``range(n)`` built from the array values."""
    _check_window(recipe, n, realization, max_window)
    raws: dict = {}
    facts = []
    for t in _active_tuples(recipe, n):
        f = recipe.function_for(t, realization)
        point = []
        for s in _hat_subsets(t):
            if s not in raws:
                raws[s] = array.raw(s)
            point.append(raws[s])
        for r in f.top_at_raw(point, array.bits):
            facts.append((r, t))
    return WindowStructure(recipe.language, n, frozenset(facts), GENERAL)


# ---------------------------------------------------------------------------
# exact pushforward


def window_distribution(recipe, n: int, realization: WindowStructure | None = None,
                        cell_cap: int = DEFAULT_CELL_CAP) -> dict[frozenset, Fraction]:
    """Exact law of ``sample(recipe, n, ...)`` by summing volumes over a common grid."""
    tuples = _active_tuples(recipe, n)
    per_tuple = []
    breaks: dict[tuple, set] = {}
    for t in tuples:
        f = recipe.function_for(t, realization)
        glob = [tuple(sorted(t[i] for i in c)) for c in f.coordinates]
        per_tuple.append((t, f, glob))
        for c, g in zip(f.coordinates, glob):
            breaks.setdefault(g, set()).update(f.grid[c])
    grid = {g: tuple(sorted(b)) for g, b in breaks.items()}
    split = {g for g, b in grid.items() if b}

    # Tuples sharing a split coordinate are dependent; others factor out.
    parent = list(range(len(per_tuple)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    for i, (_, _, glob) in enumerate(per_tuple):
        for g in glob:
            if g in split:
                if g in owner:
                    parent[find(i)] = find(owner[g])
                else:
                    owner[g] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(per_tuple)):
        groups.setdefault(find(i), []).append(i)

    component_dists = []
    for members in groups.values():
        gcoords = sorted({g for i in members for g in per_tuple[i][2] if g in split}, key=lambda s: (len(s), s))
        position = {g: j for j, g in enumerate(gcoords)}
        size = 1
        for g in gcoords:
            size *= len(grid[g]) + 1
        if size > cell_cap:
            raise GridExplosion(f"{size} grid cells exceed the cap {cell_cap}")
        # Integer interval widths over a per-coordinate common denominator.
        widths, denom = [], 1
        for g in gcoords:
            ends = (Fraction(0),) + grid[g] + (Fraction(1),)
            d = math.lcm(*(e.denominator for e in ends))
            widths.append([int((hi - lo) * d) for lo, hi in zip(ends, ends[1:])])
            denom *= d
        # For each tuple: which component coordinate feeds each of its own
        # coordinates, and the local interval index for every global one.
        readers = []
        for i in members:
            t, f, glob = per_tuple[i]
            maps = []
            for c, g in zip(f.coordinates, glob):
                if g in position:
                    lows = (Fraction(0),) + grid[g]
                    maps.append((position[g], tuple(_index(f.grid[c], lo) for lo in lows)))
                else:
                    maps.append((None, (0,)))
            tops = {key: frozenset((r, t) for r in top) for key, top in f._tops.items()}
            readers.append((maps, tops))
        dist: dict = {}
        for key in itertools.product(*(range(len(w)) for w in widths)):
            vol = 1
            for w, i in zip(widths, key):
                vol *= w[i]
            parts = tuple(
                tops[tuple(m[0] if j is None else m[key[j]] for j, m in maps)] for maps, tops in readers
            )
            dist[parts] = dist.get(parts, 0) + vol
        merged: dict = {}
        for parts, vol in dist.items():
            fs = frozenset().union(*parts)
            merged[fs] = merged.get(fs, 0) + Fraction(vol, denom)
        component_dists.append(merged)

    out = {frozenset(): Fraction(1)}
    for dist in component_dists:
        nxt: dict = {}
        for a, wa in out.items():
            for b, wb in dist.items():
                nxt[a | b] = nxt.get(a | b, 0) + wa * wb
        out = nxt
        if len(out) > cell_cap:
            raise GridExplosion(f"{len(out)} outcomes exceed the cap {cell_cap}")
    return {d: w for d, w in out.items() if w}


def pushforward(recipe, n: int, cell_cap: int = DEFAULT_CELL_CAP, base: CanonicalPresentation | None = None) -> WindowMeasure:
    """Exact window measure of the recipe up to window ``n``.

    Sym recipes are read over the pure set (one relation per arity); Aut
    recipes over their base, realizing each base type by its own diagram.
    """
    if isinstance(recipe, AutRecipe):
        pres = recipe.base
        tables = {}
        for p, k in pres.language:
            if k <= n:
                tables[p] = window_distribution(recipe, k, pres.diagram_structure(p), cell_cap)
        return WindowMeasure(pres, recipe.language, n, tables)
    from .presets import pure_set

    pres = base or pure_set(n)
    tables = {}
    for p, k in pres.language:
        if k <= n:
            tables[p] = window_distribution(recipe, k, None, cell_cap)
    return WindowMeasure(pres, recipe.language, n, tables)


# ---------------------------------------------------------------------------
# the Erdos-Renyi recipe of a free canonical structure


def _diagram_type(pres: CanonicalPresentation, rel: str) -> OrderedQfType:
    k = pres.language.arity(rel)
    facts = frozenset(
        (pres.table[(rel, j)], j) for m in range(1, k + 1) for j in itertools.combinations(range(k), m)
    )
    return OrderedQfType(pres.language, k, facts)


def _top(value: OrderedQfType) -> str | None:
    top = value.top()
    return next(iter(top)) if len(top) == 1 else None


def erdos_renyi(base: CanonicalPresentation, require_free: bool = True) -> SymRecipe:
    """Choose each tuple's relation uniformly among the extensions of its faces, arity by arity."""
    if require_free:
        report = is_free(base)
        if not report.free:
            raise NotFree(f"{report.witness} has no extension", report.witness)
    lang = base.language
    unary = lang.of_arity(1)
    code = IntervalCode(unary)
    f1 = StepFunction.from_rule(
        1, lang, {(0,): [Fraction(j, len(unary)) for j in range(1, len(unary))]},
        lambda pt: _diagram_type(base, code.item(code.index(pt[(0,)]))),
    )
    functions = {1: f1}
    for n1 in range(2, base.max_arity + 1):
        prev = functions[n1 - 1]
        fs = faces(n1)
        cs = coords(n1)
        top_c = tuple(range(n1))
        grid: dict = {}
        for c in cs:
            if c == top_c or not c:
                continue
            acc = set()
            for i, face in enumerate(fs):
                if i not in c:
                    acc.update(prev.grid[positions(c, face)])
            grid[c] = tuple(sorted(acc))
        lower = [c for c in cs if c != top_c]

        def collection(point, fs=fs, prev=prev):
            parts = []
            for face in fs:
                sub = {c: point[tuple(face[x] for x in c)] for c in prev.coordinates}
                parts.append(_top(prev(sub)))
            return tuple(parts)

        sizes = set()
        for key in itertools.product(*(range(len(grid.get(c, ())) + 1) for c in lower)):
            point = {c: interval_of(grid.get(c, ()), i)[0] for c, i in zip(lower, key)}
            parts = collection(point)
            if None in parts:
                continue
            sizes.add(len(extensions_of(base, parts)))
        grid[top_c] = tuple(sorted({Fraction(j, s) for s in sizes if s for j in range(1, s)}))

        def rule(point, collection=collection, n1=n1):
            parts = collection(point)
            exts = extensions_of(base, parts) if None not in parts else []
            if not exts:
                return OrderedQfType(lang, n1)
            c = IntervalCode(tuple(exts))
            return _diagram_type(base, c.item(c.index(point[tuple(range(n1))])))

        functions[n1] = StepFunction.from_rule(n1, lang, grid, rule)
        _check_equivariant(base, functions[n1])
    return SymRecipe(lang, functions)


def _check_equivariant(base: CanonicalPresentation, f: StepFunction):
    """Every reordering of a tuple must read the reordered relation, cell by cell.

    The tuple ``t`` sees the point ``c -> point[sorted(t[i] for i in c)]``; its relation must be
    the one the identity tuple's relation forces on ``t``.
    """
    n = f.arity
    cs = f.coordinates
    for key in itertools.product(*(range(len(f.grid[c]) + 1) for c in cs)):
        point = {c: interval_of(f.grid[c], i)[0] for c, i in zip(cs, key)}
        rel = _top(f(point))
        if rel is None:
            continue
        forced = base.diagram_structure(rel)
        for t in itertools.permutations(range(n)):
            moved = {c: point[tuple(sorted(t[i] for i in c))] for c in cs}
            got = _top(f(moved))
            if got != forced.relation_at(t):
                raise NotEquivariant(
                    f"tuple {t} reads {got} where {rel} forces {forced.relation_at(t)}",
                    {"relation": rel, "tuple": t, "got": got, "expected": forced.relation_at(t)},
                )


# ---------------------------------------------------------------------------
# regions of the Erdos-Renyi recipe and their affine charts


@dataclass(frozen=True)
class RegionMap:
    """``S_p`` as a product of intervals and the affine chart ``[0,1)^coords -> S_p``."""

    relation: str
    arity: int
    intervals: Mapping[tuple, tuple[Fraction, Fraction]] = field(hash=False, compare=False)

    @property
    def coordinates(self):
        return coords(self.arity)

    def volume(self) -> Fraction:
        v = Fraction(1)
        for lo, hi in self.intervals.values():
            v *= hi - lo
        return v

    def alpha(self, point: Mapping[tuple, Fraction]) -> dict:
        return {c: lo + (hi - lo) * point[c] for c, (lo, hi) in self.intervals.items()}

    def alpha_inv(self, point: Mapping[tuple, Fraction]) -> dict:
        return {c: (point[c] - lo) / (hi - lo) for c, (lo, hi) in self.intervals.items()}

    def contains(self, point) -> bool:
        return all(lo <= point[c] < hi for c, (lo, hi) in self.intervals.items())

    def contains_box(self, box) -> bool:
        return all(lo <= box[c][0] <= box[c][1] <= hi for c, (lo, hi) in self.intervals.items())

    def preimage_box(self, box) -> dict:
        out = {}
        for c, (lo, hi) in self.intervals.items():
            a, b = box[c]
            out[c] = ((a - lo) / (hi - lo), (b - lo) / (hi - lo))
        return out


def box_volume(box) -> Fraction:
    v = Fraction(1)
    for a, b in box.values():
        v *= b - a
    return v


def region_maps(base: CanonicalPresentation, up_to_arity: int | None = None) -> dict[str, RegionMap]:
    report = is_free(base)
    if not report.free:
        raise NotFree(f"{report.witness} has no extension", report.witness)
    k = base.max_arity if up_to_arity is None else min(up_to_arity, base.max_arity)
    unary = base.language.of_arity(1)
    out = {}
    for p, m in base.language:
        if m > k:
            continue
        intervals = {(): (Fraction(0), Fraction(1))}
        for s in coords(m)[1:]:
            q = base.table[(p, s)]
            if len(s) == 1:
                options = list(unary)
            else:
                parts = tuple(base.table[(q, f)] for f in faces(len(s)))
                options = extensions_of(base, parts)
            i, size = options.index(q), len(options)
            intervals[s] = (Fraction(i, size), Fraction(i + 1, size))
        out[p] = RegionMap(p, m, intervals)
    return out


# ---------------------------------------------------------------------------
# extension to a free completion, and composition with region charts


def extend_to_free(recipe: AutRecipe, completion: CanonicalPresentation) -> AutRecipe:
    """Keep the functions on old types; use the constant trivial type on new ones."""
    if not is_free(completion).free:
        raise NotACompletion("the target presentation is not free")
    res = is_sub_can(recipe.base, completion)
    if not res.ok:
        raise NotACompletion(f"the base does not embed canonically: {res.witness}")
    back = {v: p for p, v in res.embedding.items()}
    functions = {}
    for r, k in completion.language:
        if k > recipe.max_arity:
            continue
        if r in back:
            functions[r] = recipe.functions[back[r]]
        else:
            functions[r] = StepFunction.constant(k, recipe.language)
    return AutRecipe(completion, recipe.language, functions)


def combine(a: SymRecipe, b: SymRecipe) -> SymRecipe:
    """Recipe whose value is the union of both values, over the union language."""
    lang = a.language.union(b.language)
    functions = {}
    for k in sorted(set(a.functions) | set(b.functions)):
        fa = a.functions.get(k) or StepFunction.constant(k, a.language)
        fb = b.functions.get(k) or StepFunction.constant(k, b.language)
        grid = {c: tuple(sorted(set(fa.grid[c]) | set(fb.grid[c]))) for c in coords(k)}
        functions[k] = StepFunction.from_rule(
            k, lang, grid, lambda pt, fa=fa, fb=fb, k=k: OrderedQfType(lang, k, fa(pt).facts | fb(pt).facts)
        )
    return SymRecipe(lang, functions)


def compose_with_region(e: SymRecipe, base: CanonicalPresentation, maps: Mapping[str, RegionMap] | None = None) -> AutRecipe:
    """``f_p = (part of e outside the base language) o alpha_p`` for each base type ``p``."""
    maps = maps if maps is not None else region_maps(base)
    cm = erdos_renyi(base)
    base_names = set(base.language.names)
    for name in base_names:
        if name not in e.language:
            raise NotAgreeingWithCM(f"{name} is missing from the recipe language")
    target = Language(tuple(r for r in e.language.relations if r[0] not in base_names))
    for k, ck in cm.functions.items():
        ek = e.functions.get(k)
        if ek is None:
            raise NotAgreeingWithCM(f"no function for arity {k}")
        grid = {c: tuple(sorted(set(ek.grid[c]) | set(ck.grid[c]))) for c in coords(k)}
        for key in itertools.product(*(range(len(grid[c]) + 1) for c in coords(k))):
            point = {c: interval_of(grid[c], i)[0] for c, i in zip(coords(k), key)}
            mine = frozenset(r for r in ek(point).top() if r in base_names)
            theirs = ck(point).top()
            if mine != theirs:
                raise NotAgreeingWithCM(
                    f"arity {k}: cell at {point} gives {sorted(mine)} instead of {sorted(theirs)}",
                    {"arity": k, "point": point, "got": mine, "expected": theirs},
                )
    functions = {}
    for p, k in base.language:
        if k > target.max_arity or k not in e.functions:
            continue
        ek, rm = e.functions[k], maps[p]
        grid = {}
        for c in coords(k):
            lo, hi = rm.intervals[c]
            grid[c] = tuple(sorted({(b - lo) / (hi - lo) for b in ek.grid[c] if lo < b < hi}))
        functions[p] = StepFunction.from_rule(
            k, target, grid, lambda pt, ek=ek, rm=rm: ek(rm.alpha(pt)).project(target)
        )
    return AutRecipe(base, target, functions)
