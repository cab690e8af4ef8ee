"""The invariant suite behind ``autrecipe verify all``."""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

from scipy.stats import chi2

from . import presets
from .canonical import (
    enumerate_compatible,
    extensions_of,
    free_completion,
    has_trivial_dcl,
    is_free,
    is_sub_can,
)
from .generators import (
    COLORING,
    coloring_aut_recipe,
    random_aut_recipe,
    random_box,
    random_colored_graph_recipe,
)
from .lang import Conj, Language, Literal, parse_formula
from .measure import (
    AdditivityViolation,
    ConcentratedBaseMeasure,
    NegativeMass,
    NotInvariant,
    check_invariance,
    decompose,
    describe_merge,
    from_pi_system,
    merge,
    product_measure,
    restrict_measure,
)
from .qftypes import IntervalCode, enumerate_nonredundant_types, merge as merge_parts, split
from .recipe import (
    UniformArray,
    box_volume,
    combine,
    compose_with_region,
    erdos_renyi,
    extend_to_free,
    pushforward,
    region_maps,
    coords,
    sample,
)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def chi_square(counts: dict, probs: dict, total: int):
    """Pearson statistic and p-value of observed ``counts`` against exact ``probs``."""
    stat = 0.0
    for key, p in probs.items():
        expected = total * float(p)
        stat += (counts.get(key, 0) - expected) ** 2 / expected
    extra = sum(v for k, v in counts.items() if k not in probs)
    if extra:
        return float("inf"), 0.0
    dof = len(probs) - 1
    return stat, float(chi2.sf(stat, dof))


def sample_many(recipe, n: int, seed: int, count: int, threads: int = 1, realization=None, bits: int = 64):
    """Samples ``0..count-1``; sample ``i`` reads stream ``i`` of the seeded array."""
    def one(i):
        return sample(recipe, n, UniformArray(seed, i, bits), realization)

    if threads <= 1:
        return [one(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(count)))


# ---------------------------------------------------------------------------
# the individual checks


def check_freeness():
    r = is_free(presets.rado(4))
    t = is_free(presets.triangle_free(3))
    ok = r.free and r.bound == 4 and not t.free and t.witness.parts == ("E", "E", "E")
    return ok, f"rado: {r.summary()}; triangle-free: {t.summary()}"


def check_free_completion():
    tf = presets.triangle_free(3)
    fc = free_completion(tf, 3)
    rado = presets.rado(3)
    classes = fc.relation_classes(3)
    there, back = is_sub_can(fc, rado), is_sub_can(rado, fc)
    again = free_completion(fc, 3)
    fixpoint = again.language == fc.language and again.table == fc.table
    unrealized = [c for c in enumerate_compatible(tf, 3) if not extensions_of(tf, c)]
    ok = len(classes) == 4 and is_free(fc).free and there.ok and back.ok and fixpoint and len(unrealized) == 1
    return ok, f"{len(classes)} arity-3 classes, sub-can both ways: {there.ok and back.ok}, fixpoint: {fixpoint}"


def check_minimality():
    tf = presets.triangle_free(3)
    fc = free_completion(tf, 3)
    pool = presets.free_pool(3)
    above = [(name, n) for name, n in pool if is_sub_can(tf, n).ok]
    bad = [name for name, n in above if not is_sub_can(fc, n).ok]
    return not bad and bool(above), f"{len(above)} of {len(pool)} pool members contain the triangle-free structure" + (
        f"; fails for {bad}" if bad else "")


def check_dcl():
    g, _ = has_trivial_dcl(presets.graph_age(5))
    t, _ = has_trivial_dcl(presets.triangle_free_age(5))
    s, w = has_trivial_dcl(presets.successor_age(3))
    return g and t and not s and w is not None, f"graphs {g}, triangle-free {t}, successor {s}"


def check_erdos_renyi(sample_count: int, alpha: Fraction, seed: int, threads: int = 1):
    rado = presets.rado(3)
    er = erdos_renyi(rado)
    table = pushforward(er, 3).tables["D3"]
    exact = len(table) == 8 and all(w == Fraction(1, 8) for w in table.values())
    counts: dict = {}
    for s in sample_many(er, 3, seed, sample_count, threads):
        counts[s.facts] = counts.get(s.facts, 0) + 1
    stat, p = chi_square(counts, table, sample_count)
    return exact and p > alpha, f"exact 1/8 table: {exact}; chi-square {stat:.3f}, p = {p:.4f} over {sample_count} samples"


def check_region_maps(seed: int, boxes: int = 100):
    rng = random.Random(seed)
    rado = presets.rado(3)
    maps = region_maps(rado)
    er = erdos_renyi(rado)
    for p, rm in maps.items():
        for _ in range(boxes):
            box = random_box(rng, rm.intervals)
            if box_volume(box) / rm.volume() != box_volume(rm.preimage_box(box)):
                return False, f"volume identity fails for {p}"
        point = {c: Fraction(rng.randrange(1000), 1000) for c in coords(rm.arity)}
        if er.functions[rm.arity](rm.alpha(point)).top() != {p}:
            return False, f"alpha({p}) leaves its region"
        for m in range(1, rm.arity):
            for j in itertools.combinations(range(rm.arity), m):
                q = maps[rado.table[(p, j)]]
                for c in coords(m):
                    if rm.intervals[tuple(j[x] for x in c)] != q.intervals[c]:
                        return False, f"nesting fails for {p} on {j}"
    return True, f"{len(maps)} regions, {boxes} boxes each"


def coloring_instance():
    """(mu, nu, eta): i.i.d. coloring over the canonical random graph merged with its graph law."""
    rado = presets.rado(3)
    mu = product_measure(rado, COLORING, 3, {"Red": Fraction(1, 3)})
    eta = pushforward(erdos_renyi(rado), 3)
    nu = ConcentratedBaseMeasure.from_window_measure(eta, rado)
    return mu, nu


def check_merge(seed: int, count: int = 10):
    rado = presets.rado(3)
    mu, nu = coloring_instance()
    merged = merge(mu, nu)
    names = set(rado.language.names)
    for q, dist in merged.tables.items():
        lm = {}
        for d, w in dist.items():
            k = frozenset(f for f in d if f[0] in names)
            lm[k] = lm.get(k, 0) + w
        if lm != nu.as_window_measure().tables[q]:
            return False, f"graph marginal differs at {q}"
    events = _events_agreeing(mu, nu, merged)
    if isinstance(events, str):
        return False, events
    formula = parse_formula("E(0,1) & Red(0) & !Red(1)")
    spot = describe_merge(mu, nu, "D2", formula)
    if spot != Fraction(1, 9) or merged.prob("D2", formula) != spot:
        return False, f"spot value {spot}"
    rng = random.Random(seed)
    for i in range(count):
        eta = pushforward(random_colored_graph_recipe(rado, rng), 3)
        m2, n2, _ = decompose(eta, rado)
        if not merge(m2, n2).same_tables(eta):
            return False, f"merge(decompose(eta)) differs for sample {i}"
    return True, f"marginals, {events} events, spot value 1/9, {count} round trips"


def _events_agreeing(mu, nu, merged):
    """Compare describe_merge with merge on every complete diagram and on every literal and pair of literals.

    Every quantifier-free event is a disjoint union of complete diagrams, so agreement on
    diagrams fixes all events; literals and pairs exercise the formula path directly.
    """
    checked = 0
    for q, dist in merged.tables.items():
        k = nu.outer.language.arity(q)
        slots = merged.extra.slots(k)
        for d in dist:
            conj = Conj.from_diagram(d, slots)
            if describe_merge(mu, nu, q, conj) != dist[d]:
                return f"diagram {sorted(d)} on {q}"
            checked += 1
        lits = [Literal(r, t, sign) for r, t in slots for sign in (True, False)]
        for size in (1, 2):
            for combo in itertools.combinations(lits, size):
                conj = Conj(frozenset(combo))
                if describe_merge(mu, nu, q, conj) != merged.prob(q, conj):
                    return f"event {conj} on {q}"
                checked += 1
    return checked


def check_recipe_invariance(seed: int, count: int = 10):
    rng = random.Random(seed)
    tf = presets.triangle_free(3)
    for i in range(count):
        report = check_invariance(pushforward(random_aut_recipe(tf, rng), 3))
        if not report.ok:
            return False, f"recipe {i}: {report.summary()}"
    planted = check_invariance(_plant_asymmetry(pushforward(coloring_aut_recipe(tf), 3), "E"))
    if planted.ok or planted.witness is None:
        return False, "planted asymmetry went unnoticed"
    return True, f"{count} random recipes invariant; planted asymmetry caught: {planted.summary()}"


def _plant_asymmetry(mu, rel):
    """Make ``Red`` certain on the first element of every ``rel`` tuple, leaving other types alone."""
    table = {}
    for d, w in mu.tables[rel].items():
        key = d | {("Red", (0,))}
        table[key] = table.get(key, 0) + w
    return replace(mu, tables={**mu.tables, rel: table})


def check_round_trip(seed: int, count: int = 10):
    rng = random.Random(seed)
    tf = presets.triangle_free(3)
    fc = free_completion(tf, 3)
    for i in range(count):
        f = random_aut_recipe(tf, rng)
        back = restrict_measure(pushforward(extend_to_free(f, fc), 3), tf)
        if not back.same_tables(pushforward(f, 3)):
            return False, f"recipe {i} changes after extension and restriction"
    rado = presets.rado(3)
    e = combine(erdos_renyi(rado), coloring_sym_recipe())
    composed = compose_with_region(e, rado)
    if not pushforward(composed, 3).same_tables(pushforward(coloring_aut_recipe(rado), 3)):
        return False, "composition with region maps does not reproduce the coloring"
    return True, f"{count} extensions restrict back; composition reproduces the coloring"


def coloring_sym_recipe(threshold=Fraction(1, 3)):
    from .generators import threshold_recipe

    return threshold_recipe(COLORING, "Red", (0,), threshold)


def check_types():
    e = Language.of(("E", 2))
    counts = {n: len(enumerate_nonredundant_types(e, n)) for n in (1, 2, 3)}
    for n in (1, 2, 3):
        for q in enumerate_nonredundant_types(e, n):
            if merge_parts(split(q)) != q:
                return False, f"split/merge changes {q}"
    code = IntervalCode(("x0", "x1", "x2"))
    inf = IntervalCode.infinite(lambda i: i)
    ok = counts == {1: 1, 2: 4, 3: 64} and code.index(1) == 0 and inf.interval(2) == (Fraction(3, 4), Fraction(7, 8))
    return ok, f"type counts {counts}"


def check_pi_system():
    rado = presets.rado(3)
    accepted = from_pi_system(_iid(Fraction(1, 3)), rado, COLORING, 3)
    third = _iid(Fraction(1, 3))
    red = Conj.of(Literal("Red", (0,)))
    caught = []
    planted = [
        lambda p, c: Fraction(-1, 10) if c == red else third(p, c),
        _tampered_mapping(rado),
        _type_dependent(rado),
    ]
    expected = (NegativeMass, AdditivityViolation, NotInvariant)
    for assign, exc in zip(planted, expected):
        try:
            from_pi_system(assign, rado, COLORING, 3)
        except exc as err:
            if err.witness is not None:
                caught.append(type(err).__name__)
    ok = accepted.prob("U", red) == Fraction(1, 3) and len(caught) == 3
    return ok, f"i.i.d. coloring accepted; rejected: {', '.join(caught)}"


def _iid(prob):
    def value(p, conj):
        if conj.is_contradictory():
            return Fraction(0)
        out = Fraction(1)
        for lit in conj.literals:
            out *= prob if lit.positive else 1 - prob
        return out

    return value


def _tampered_mapping(base):
    third = _iid(Fraction(1, 3))
    table = {}
    for p, k in base.language:
        slots = COLORING.slots(k)
        for bits in itertools.product((True, False), repeat=len(slots)):
            conj = Conj.from_diagram({s for s, b in zip(slots, bits) if b}, slots)
            table[(p, conj)] = third(p, conj)
    table[("E", Conj.of(Literal("Red", (0,))))] = Fraction(1, 2)
    return table


def _type_dependent(base):
    def value(p, conj):
        return _iid(Fraction(1, 2) if p == "E" else Fraction(1, 3))(p, conj)

    return value


def check_determinism(seed: int):
    er = erdos_renyi(presets.rado(3))
    one = [s.facts for s in sample_many(er, 4, seed, 200, 1)]
    again = [s.facts for s in sample_many(er, 4, seed, 200, 1)]
    many = [s.facts for s in sample_many(er, 4, seed, 200, 8)]
    return one == again == many, "identical across runs and thread counts 1 and 8"


def run_all(config) -> list[CheckResult]:
    seed = config.seed
    checks = [
        ("freeness", check_freeness),
        ("free completion", check_free_completion),
        ("minimality of the free completion", check_minimality),
        ("trivial dcl via strong amalgamation", check_dcl),
        ("Erdos-Renyi pushforward and sampler", lambda: check_erdos_renyi(config.sample_count, config.chi_square_alpha, seed, config.threads)),
        ("region maps", lambda: check_region_maps(seed)),
        ("merge calculus", lambda: check_merge(seed)),
        ("recipe invariance", lambda: check_recipe_invariance(seed)),
        ("extension and composition", lambda: check_round_trip(seed)),
        ("type machinery", check_types),
        ("pi-system extension", check_pi_system),
        ("determinism", lambda: check_determinism(seed)),
    ]
    out = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # reported as a failed property with its message
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, ok, detail))
    return out
