"""Command-line front end.

Exit status: 0 success, 1 malformed input, 2 violated precondition,
3 property failure (a witness is printed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from . import jsonio, presets
from .ages import check_age_properties
from .canonical import (
    canonicalize,
    free_completion,
    has_trivial_dcl,
    is_free,
    is_sub_can,
)
from .lang import (
    StructureError,
    UnknownRelation,
    evaluate,
    nonredundant_expansion,
    parse_formula,
)
from .measure import (
    AdditivityViolation,
    ConcentratedBaseMeasure,
    HorizonMismatch,
    NegativeMass,
    NoRealization,
    NotConcentrated,
    NotInvariant,
    ZeroMassType,
    check_invariance,
    decompose,
    fmt_diagram,
    merge,
    product_measure,
    restrict_measure,
)
from .qftypes import ArityOverflow, type_of_tuple
from .recipe import (
    AutRecipe,
    BaseRealizationMissing,
    GridExplosion,
    NotACompletion,
    NotAgreeingWithCM,
    NotEquivariant,
    NotFree,
    UniformArray,
    WindowTooLarge,
    compose_with_region,
    erdos_renyi,
    extend_to_free,
    pushforward,
    sample,
)

CONFIG_ENV = "AUTRECIPE_CONFIG"

EXIT_OK, EXIT_SCHEMA, EXIT_PRECONDITION, EXIT_PROPERTY = 0, 1, 2, 3


class PropertyFailure(Exception):
    pass


@dataclass(frozen=True)
class Config:
    max_arity: int = 3
    horizon: int = 3
    sample_count: int = 100_000
    chi_square_alpha: Fraction = Fraction(1, 1000)
    seed: int = 0
    cell_cap: int = 10**6
    max_window: int = 8
    threads: int = 1

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("seed", "chi_square_alpha"):
                continue
            if getattr(self, f.name) < 1:
                raise jsonio.SchemaError(f"config value {f.name} must be positive")
        if not 0 < self.chi_square_alpha < 1:
            raise jsonio.SchemaError("chi_square_alpha must lie in (0, 1)")


def load_config(path: str | None) -> Config:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    raw = jsonio.read_json(path)
    if not isinstance(raw, dict):
        raise jsonio.SchemaError("config must be a JSON object")
    known = {f.name for f in fields(Config)}
    unknown = set(raw) - known
    if unknown:
        raise jsonio.SchemaError(f"unknown config keys: {sorted(unknown)}")
    values = {}
    for key, v in raw.items():
        if key == "chi_square_alpha":
            values[key] = jsonio.parse_frac(v)
        elif isinstance(v, int) and not isinstance(v, bool):
            values[key] = v
        else:
            raise jsonio.SchemaError(f"config value {key} must be an integer")
    return Config(**values)


# ---------------------------------------------------------------------------
# output helpers


def emit(args, text: str):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(args, obj):
    emit(args, jsonio.dumps(obj))


def presentation_arg(ref: str, cfg: Config):
    if ref.startswith("preset:") and ref.count(":") == 1:
        ref = f"{ref}:{cfg.max_arity}"
    return jsonio.resolve_base(ref) if ref.startswith("preset:") else jsonio.load_presentation(ref)


def base_ref_for(ref: str, cfg: Config):
    """What to record as ``base_ref`` in written files: a preset name or the inline presentation."""
    if ref.startswith("preset:"):
        return ref if ref.count(":") == 2 else f"{ref}:{cfg.max_arity}"
    return jsonio.read_json(ref)


def age_arg(ref: str, bound: int):
    if ref.startswith("preset:"):
        return jsonio.age_from_json({"preset": ref.split(":", 1)[1], "size_bound": bound})
    return jsonio.age_from_json(jsonio.read_json(ref))


def parse_language_spec(text: str):
    """``"Red:1,E:2"`` or a path to a JSON language list."""
    if os.path.exists(text):
        return jsonio.language_from_json(jsonio.read_json(text))
    pairs = []
    for part in text.split(","):
        name, _, arity = part.strip().partition(":")
        if not name or not arity.isdigit():
            raise jsonio.SchemaError(f"language entries look like Name:arity, not {part!r}")
        pairs.append([name, int(arity)])
    return jsonio.language_from_json(pairs)


# ---------------------------------------------------------------------------
# lang


def cmd_lang_nonredundant(args, cfg):
    lang = parse_language_spec(args.language)
    target, translator = nonredundant_expansion(lang)
    emit_json(args, {
        "language": jsonio.language_to_json(target),
        "patterns": {name: {"relation": src, "pattern": list(pat)} for name, (src, pat) in sorted(translator.table.items())},
    })


def cmd_lang_eval(args, cfg):
    s = jsonio.structure_from_json(jsonio.read_json(args.structure))
    emit(args, f"{str(evaluate(s, parse_formula(args.formula))).lower()}\n")


def cmd_lang_type(args, cfg):
    s = jsonio.structure_from_json(jsonio.read_json(args.structure))
    t = [int(x) for x in args.tuple.split(",")]
    q = type_of_tuple(s, t)
    emit_json(args, {"vars": q.n, "atoms": jsonio.facts_to_json(q.facts)})


# ---------------------------------------------------------------------------
# age


def cmd_age_enumerate(args, cfg):
    emit_json(args, jsonio.age_to_json(age_arg(f"preset:{args.preset}", args.bound)))


def cmd_age_check(args, cfg):
    age = age_arg(args.age, args.bound)
    report = check_age_properties(age)
    lines = [report.summary()]
    for k, w in report.witnesses.items():
        lines.append(f"{k} witness: {_describe_witness(w)}")
    emit(args, "\n".join(lines) + "\n")
    if not (report.hp and report.jep and report.sap):
        raise PropertyFailure("\n".join(lines[1:]) or lines[0])


def _describe_witness(w) -> str:
    if isinstance(w, dict):
        return "; ".join(f"{k} = {_describe_witness(v)}" for k, v in w.items())
    if hasattr(w, "facts") and hasattr(w, "size"):
        return f"{w.size} points {fmt_diagram(w.facts)}"
    return str(w)


# ---------------------------------------------------------------------------
# canon


def cmd_canon_build(args, cfg):
    if args.source.startswith("preset:"):
        name = args.source.split(":", 1)[1]
        if name in jsonio.PRESETS:
            pres = jsonio.preset_presentation(name, cfg.max_arity)
        else:
            pres = canonicalize(age_arg(args.source, args.bound or cfg.max_arity), cfg.max_arity, presets.graph_namer)
    else:
        obj = jsonio.load_any(args.source)
        pres = canonicalize(obj, cfg.max_arity)
    emit_json(args, jsonio.presentation_to_json(pres))


def cmd_canon_free_check(args, cfg):
    pres = presentation_arg(args.presentation, cfg)
    report = is_free(pres)
    emit(args, report.summary() + "\n")
    if not report.free:
        raise PropertyFailure(report.summary())


def cmd_canon_free_complete(args, cfg):
    pres = presentation_arg(args.presentation, cfg)
    emit_json(args, jsonio.presentation_to_json(free_completion(pres, cfg.max_arity)))


def cmd_canon_dcl_check(args, cfg):
    source = args.source
    if source.startswith("preset:") and source.split(":")[1] in ("graphs", "triangle-free", "successor"):
        target = age_arg(source, args.bound)
    else:
        obj = jsonio.load_any(source) if not source.startswith("preset:") else presentation_arg(source, cfg)
        target = obj
    ok, witness = has_trivial_dcl(target)
    if ok:
        emit(args, "trivial dcl: strong amalgamation holds\n")
        return
    text = f"non-trivial dcl: no strong amalgam for {_describe_witness(witness)}"
    emit(args, text + "\n")
    raise PropertyFailure(text)


def cmd_canon_sub_can(args, cfg):
    a, b = presentation_arg(args.smaller, cfg), presentation_arg(args.larger, cfg)
    res = is_sub_can(a, b)
    if res.ok:
        emit_json(args, {"embedding": dict(sorted(res.embedding.items()))})
        return
    text = f"not canonically contained: {_describe_witness(res.witness)}"
    emit(args, text + "\n")
    raise PropertyFailure(text)


# ---------------------------------------------------------------------------
# measure


def cmd_measure_build(args, cfg):
    base = presentation_arg(args.base, cfg)
    extra = parse_language_spec(args.extra)
    probs = {}
    for item in args.prob or []:
        name, _, value = item.partition("=")
        if name not in extra:
            raise jsonio.SchemaError(f"--prob names {name!r}, which is not in the extra language")
        probs[name] = jsonio.parse_frac(value)
    mu = product_measure(base, extra, min(cfg.horizon, base.max_arity), probs)
    emit_json(args, jsonio.measure_to_json(mu, base_ref_for(args.base, cfg)))


def _report_invariance(args, mu):
    report = check_invariance(mu)
    emit(args, report.summary() + "\n")
    if not report.ok:
        raise PropertyFailure(report.summary())


def cmd_measure_check(args, cfg):
    _report_invariance(args, jsonio.load_measure(args.measure))


def cmd_measure_restrict(args, cfg):
    mu = jsonio.load_measure(args.measure)
    small = presentation_arg(args.to, cfg)
    emit_json(args, jsonio.measure_to_json(restrict_measure(mu, small), base_ref_for(args.to, cfg)))


def cmd_measure_merge(args, cfg):
    mu = jsonio.load_measure(args.mu)
    nu_wm = jsonio.load_measure(args.nu)
    nu = ConcentratedBaseMeasure.from_window_measure(nu_wm, mu.base)
    out = merge(mu, nu)
    emit_json(args, jsonio.measure_to_json(out, nu_wm.base_ref))


def cmd_measure_decompose(args, cfg):
    eta = jsonio.load_measure(args.measure)
    inner = presentation_arg(args.inner, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ZeroMassType)
        mu, nu, flagged = decompose(eta, inner)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    emit_json(args, {
        "mu": jsonio.measure_to_json(mu, base_ref_for(args.inner, cfg)),
        "nu": jsonio.measure_to_json(nu.as_window_measure(), eta.base_ref),
        "zero_mass_types": flagged,
    })


def cmd_measure_eval(args, cfg):
    mu = jsonio.load_measure(args.measure)
    if args.type not in mu.tables:
        raise UnknownRelation(args.type)
    formula = parse_formula(args.formula)
    emit(args, jsonio.frac_str(mu.prob(args.type, formula)) + "\n")


# ---------------------------------------------------------------------------
# recipe


def _recipe_base_ref(path: str):
    obj = jsonio.read_json(path)
    return obj.get("base_ref") if isinstance(obj, dict) else None


def cmd_recipe_erdos_renyi(args, cfg):
    base = presentation_arg(args.base, cfg)
    emit_json(args, jsonio.recipe_to_json(erdos_renyi(base, require_free=not args.no_free_check)))


def cmd_recipe_pushforward(args, cfg):
    recipe = jsonio.load_recipe(args.recipe)
    if args.window > cfg.max_window:
        raise WindowTooLarge(f"window {args.window} exceeds the configured maximum {cfg.max_window}")
    mu = pushforward(recipe, args.window, cfg.cell_cap)
    if args.json:
        ref = _recipe_base_ref(args.recipe) if isinstance(recipe, AutRecipe) else f"preset:pure-set:{args.window}"
        emit_json(args, jsonio.measure_to_json(mu, ref))
        return
    lines = []
    for p in mu.base_types():
        if mu.base.language.arity(p) != args.window:
            continue
        rows = sorted(mu.tables[p].items(), key=lambda kv: sorted(kv[0]))
        for d, w in rows:
            lines.append(f"{p}\t{fmt_diagram(d)}\t{jsonio.frac_str(w)}")
    emit(args, "\n".join(lines) + "\n")


def cmd_recipe_sample(args, cfg):
    from concurrent.futures import ThreadPoolExecutor

    recipe = jsonio.load_recipe(args.recipe)
    realization = None
    if args.realization:
        realization = jsonio.structure_from_json(jsonio.read_json(args.realization))
    count = args.count if args.count is not None else 1
    seed = cfg.seed
    if args.window > cfg.max_window:
        raise WindowTooLarge(f"window {args.window} exceeds the configured maximum {cfg.max_window}")

    def one(i):
        s = sample(recipe, args.window, UniformArray(seed, i, args.bits), realization, cfg.max_window)
        return json.dumps({"index": i, "facts": jsonio.facts_to_json(s.facts)}, sort_keys=True, separators=(",", ":"))

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            lines = list(pool.map(one, range(count)))
    else:
        lines = [one(i) for i in range(count)]
    header = json.dumps({"window": args.window, "seed": seed, "bits": args.bits, "count": count}, sort_keys=True, separators=(",", ":"))
    emit(args, header + "\n" + "".join(line + "\n" for line in lines))


def cmd_recipe_extend_free(args, cfg):
    recipe = jsonio.load_recipe(args.recipe)
    if not isinstance(recipe, AutRecipe):
        raise jsonio.SchemaError("extend-free needs an Aut recipe")
    completion = presentation_arg(args.completion, cfg) if args.completion else free_completion(recipe.base, recipe.base.max_arity)
    emit_json(args, jsonio.recipe_to_json(extend_to_free(recipe, completion)))


def cmd_recipe_compose_region(args, cfg):
    recipe = jsonio.load_recipe(args.recipe)
    if isinstance(recipe, AutRecipe):
        raise jsonio.SchemaError("compose-region needs a Sym recipe")
    base = presentation_arg(args.base, cfg)
    emit_json(args, jsonio.recipe_to_json(compose_with_region(recipe, base), base_ref_for(args.base, cfg)))


# ---------------------------------------------------------------------------
# verify


def cmd_verify_all(args, cfg):
    from .verify import run_all

    results = run_all(cfg)
    emit(args, "".join(r.line() + "\n" for r in results))
    if not all(r.ok for r in results):
        raise PropertyFailure("; ".join(r.name for r in results if not r.ok) + " failed")


# ---------------------------------------------------------------------------
# parser


def _globals(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="seed for the uniform array")
    parser.add_argument("--max-arity", type=int, default=default, help="largest relation arity")
    parser.add_argument("--horizon", type=int, default=default, help="window size of measure tables")
    parser.add_argument("--count", type=int, default=default, help="number of samples")
    parser.add_argument("--threads", type=int, default=default, help="worker threads for sampling")
    parser.add_argument("--config", default=default, help=f"JSON config file (default: ${CONFIG_ENV})")
    parser.add_argument("--out", "-o", default=default, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autrecipe", description="Invariant random structures from recipes.")
    _globals(parser, suppress=False)
    top = parser.add_subparsers(dest="group", required=True)

    def group(name, help_text):
        p = top.add_parser(name, help=help_text)
        return p.add_subparsers(dest="command", required=True)

    def leaf(sub, name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _globals(p, suppress=True)
        p.set_defaults(func=func)
        return p

    g = group("lang", "languages, structures and formulas")
    p = leaf(g, "nonredundant", cmd_lang_nonredundant, "expand a language to its non-redundant form")
    p.add_argument("language", help='"Name:arity,..." or a JSON language file')
    p = leaf(g, "eval", cmd_lang_eval, "evaluate a quantifier-free formula")
    p.add_argument("structure")
    p.add_argument("formula")
    p = leaf(g, "type", cmd_lang_type, "quantifier-free type of a tuple")
    p.add_argument("structure")
    p.add_argument("tuple", help="comma-separated elements")

    g = group("age", "finite ages")
    p = leaf(g, "enumerate", cmd_age_enumerate, "write a preset age")
    p.add_argument("preset", choices=["graphs", "triangle-free", "successor"])
    p.add_argument("--bound", type=int, default=4)
    p = leaf(g, "check", cmd_age_check, "check HP, JEP and SAP")
    p.add_argument("age", help="age file or preset:graphs|triangle-free|successor")
    p.add_argument("--bound", type=int, default=4)

    g = group("canon", "canonical presentations")
    p = leaf(g, "build", cmd_canon_build, "canonical presentation of an age or structure")
    p.add_argument("source", help=f"age/structure file, or preset:{'|'.join(jsonio.PRESETS)}")
    p.add_argument("--bound", type=int, default=None)
    p = leaf(g, "free-check", cmd_canon_free_check, "is every compatible collection realized?")
    p.add_argument("presentation")
    p = leaf(g, "free-complete", cmd_canon_free_complete, "adjoin fresh relations for unrealized collections")
    p.add_argument("presentation")
    p = leaf(g, "dcl-check", cmd_canon_dcl_check, "trivial definable closure via strong amalgamation")
    p.add_argument("source", help="age or presentation file, or a preset")
    p.add_argument("--bound", type=int, default=5)
    p = leaf(g, "sub-can", cmd_canon_sub_can, "search for a canonical embedding")
    p.add_argument("smaller")
    p.add_argument("larger")

    g = group("measure", "invariant window measures")
    p = leaf(g, "build", cmd_measure_build, "independent expansion of a base")
    p.add_argument("--base", required=True)
    p.add_argument("--extra", required=True, help='"Name:arity,..."')
    p.add_argument("--prob", action="append", help="Name=p/q, repeatable")
    p = leaf(g, "check", cmd_measure_check, "check invariance and projectivity")
    p.add_argument("measure")
    p = leaf(g, "restrict", cmd_measure_restrict, "restrict to a canonically smaller base")
    p.add_argument("measure")
    p.add_argument("--to", required=True)
    p = leaf(g, "merge", cmd_measure_merge, "merge mu with a base law nu")
    p.add_argument("mu")
    p.add_argument("nu")
    p = leaf(g, "decompose", cmd_measure_decompose, "split a measure into mu and nu")
    p.add_argument("measure")
    p.add_argument("--inner", required=True)
    p = leaf(g, "eval", cmd_measure_eval, "probability of a formula on one base type")
    p.add_argument("measure")
    p.add_argument("--type", required=True)
    p.add_argument("formula")

    g = group("recipe", "recipes, samplers and pushforwards")
    p = leaf(g, "erdos-renyi", cmd_recipe_erdos_renyi, "uniform recipe of a free base")
    p.add_argument("base")
    p.add_argument("--no-free-check", action="store_true")
    p = leaf(g, "pushforward", cmd_recipe_pushforward, "exact window distribution")
    p.add_argument("recipe")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--json", action="store_true", help="write the full measure file")
    p = leaf(g, "sample", cmd_recipe_sample, "seeded samples, one JSON line each")
    p.add_argument("recipe")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--realization", help="base structure on the window (Aut recipes)")
    p.add_argument("--bits", type=int, default=64, help="precision of the dyadic array values")
    p = leaf(g, "extend-free", cmd_recipe_extend_free, "extend an Aut recipe to the free completion")
    p.add_argument("recipe")
    p.add_argument("--completion", help="free completion presentation (computed when omitted)")
    p = leaf(g, "compose-region", cmd_recipe_compose_region, "compose with the region charts of a free base")
    p.add_argument("recipe")
    p.add_argument("--base", required=True)

    g = group("verify", "invariant suite")
    leaf(g, "all", cmd_verify_all, "run every property check")
    return parser


_SCHEMA = (jsonio.SchemaError, json.JSONDecodeError, FileNotFoundError, IsADirectoryError, UnknownRelation, StructureError)
_PRECONDITION = (
    WindowTooLarge, BaseRealizationMissing, GridExplosion, NotACompletion, NotEquivariant, HorizonMismatch,
    NotConcentrated, NoRealization, ArityOverflow, ValueError, IndexError, KeyError,
)
_PROPERTY = (NotFree, NotAgreeingWithCM, NotInvariant, AdditivityViolation, NegativeMass)


def _config_from(args) -> Config:
    cfg = load_config(args.config)
    overrides = {}
    for key in ("seed", "max_arity", "horizon", "threads"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from(args)
        args.func(args, cfg)
    except PropertyFailure as exc:
        # the report already went to stdout; repeat the witness on stderr
        print(exc, file=sys.stderr)
        return EXIT_PROPERTY
    except _PROPERTY as exc:
        witness = getattr(exc, "witness", None)
        print(f"property failure: {exc}", file=sys.stderr)
        if witness is not None:
            print(f"witness: {_describe_witness(witness)}", file=sys.stderr)
        return EXIT_PROPERTY
    except _SCHEMA as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except _PRECONDITION as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
