"""JSON encoding of languages, structures, ages, presentations, measures and recipes.

Probabilities and breakpoints are written as ``"p/q"`` strings.  Every list is
emitted in a canonical order so identical objects give identical bytes.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction

from .ages import Age
from .canonical import CanonicalPresentation, free_completion, with_generated_age
from .lang import MODES, Language, WindowStructure, injective_tuples
from .measure import WindowMeasure
from .qftypes import OrderedQfType
from .recipe import AutRecipe, StepFunction, SymRecipe


class SchemaError(ValueError):
    pass


def _require(obj, key, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"field {key!r} should be {kind.__name__}")
    return value


def frac_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    if isinstance(s, bool) or not isinstance(s, (str, int)):
        raise SchemaError(f"rational expected as 'p/q', got {s!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise SchemaError(f"not a rational: {s!r}") from None


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# languages, facts, structures


def language_to_json(lang: Language) -> list:
    return [[n, k] for n, k in lang]


def language_from_json(obj) -> Language:
    if not isinstance(obj, list) or not all(isinstance(x, list) and len(x) == 2 for x in obj):
        raise SchemaError("language must be a list of [name, arity] pairs")
    try:
        return Language(tuple((str(n), int(k)) for n, k in obj))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def facts_to_json(facts) -> list:
    return [[r, list(t)] for r, t in sorted(facts)]


def facts_from_json(obj) -> frozenset:
    if not isinstance(obj, list):
        raise SchemaError("facts must be a list of [relation, [elements]]")
    try:
        return frozenset((str(r), tuple(int(x) for x in t)) for r, t in obj)
    except (TypeError, ValueError):
        raise SchemaError("facts must be a list of [relation, [elements]]") from None


def structure_to_json(s: WindowStructure) -> dict:
    return {"kind": "structure", "language": language_to_json(s.language), "size": s.size,
            "mode": s.mode, "facts": facts_to_json(s.facts)}


def structure_from_json(obj) -> WindowStructure:
    lang = language_from_json(_require(obj, "language"))
    mode = obj.get("mode", "general")
    if mode not in MODES:
        raise SchemaError(f"unknown mode {mode!r}")
    try:
        return WindowStructure(lang, int(_require(obj, "size", int)), facts_from_json(_require(obj, "facts")), mode)
    except (KeyError, ValueError, IndexError) as exc:
        raise SchemaError(f"invalid structure: {exc}") from None


# ---------------------------------------------------------------------------
# ages


def age_to_json(age: Age) -> dict:
    return {
        "kind": "age",
        "language": language_to_json(age.language),
        "size_bound": age.size_bound,
        "mode": age.mode,
        "members": [{"size": s.size, "facts": facts_to_json(s.facts)} for s in age.sorted_members()],
    }


def age_from_json(obj) -> Age:
    if "preset" in obj:
        from . import presets

        bound = int(_require(obj, "size_bound", int))
        table = {"graphs": presets.graph_age, "triangle-free": presets.triangle_free_age, "successor": presets.successor_age}
        if obj["preset"] not in table:
            raise SchemaError(f"unknown age preset {obj['preset']!r}")
        return table[obj["preset"]](bound)
    lang = language_from_json(_require(obj, "language"))
    mode = obj.get("mode", "general")
    try:
        members = [WindowStructure(lang, int(m["size"]), facts_from_json(m["facts"]), mode) for m in _require(obj, "members", list)]
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise SchemaError(f"invalid age member: {exc}") from None
    return Age.from_structures(lang, int(_require(obj, "size_bound", int)), members, mode)


# ---------------------------------------------------------------------------
# canonical presentations


def presentation_to_json(pres: CanonicalPresentation) -> dict:
    rows = []
    for r, k in pres.language:
        for t in injective_tuples(k, k):
            rows.append({"rel": r, "index_set": list(t), "restricted_rel": pres.table[(r, t)]})
    out = {
        "kind": "presentation",
        "language": language_to_json(pres.language),
        "restriction_table": rows,
        "age_bound": pres.age.size_bound if pres.age is not None else None,
    }
    if pres.source is not None:
        out["source_language"] = language_to_json(pres.source)
    if pres.source_types is not None:
        out["source_types"] = {r: facts_to_json(f) for r, f in sorted(pres.source_types.items())}
    return out


def presentation_from_json(obj) -> CanonicalPresentation:
    lang = language_from_json(_require(obj, "language"))
    table = {}
    for row in _require(obj, "restriction_table", list):
        try:
            table[(str(row["rel"]), tuple(int(x) for x in row["index_set"]))] = str(row["restricted_rel"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError("restriction_table rows need rel, index_set, restricted_rel") from None
    source = language_from_json(obj["source_language"]) if "source_language" in obj else None
    types = None
    if "source_types" in obj:
        types = {r: facts_from_json(f) for r, f in obj["source_types"].items()}
    try:
        pres = CanonicalPresentation(lang, table, None, source, types)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    for (r, _), v in table.items():
        if r not in lang or v not in lang:
            raise SchemaError(f"restriction table mentions unknown relation {r if r not in lang else v}")
    bound = obj.get("age_bound")
    return with_generated_age(pres, int(bound)) if bound else pres


PRESETS = ("rado", "triangle-free", "successor", "pure-set", "free-completion-triangle-free")


def preset_presentation(name: str, max_arity: int = 3) -> CanonicalPresentation:
    from . import presets

    if name == "rado":
        return presets.rado(max_arity)
    if name == "triangle-free":
        return presets.triangle_free(max_arity)
    if name == "successor":
        return presets.successor(max_arity)
    if name == "pure-set":
        return presets.pure_set(max_arity)
    if name == "free-completion-triangle-free":
        return free_completion(presets.triangle_free(max_arity), max_arity)
    raise SchemaError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def resolve_base(ref, relative_to: str | None = None) -> CanonicalPresentation:
    """``"preset:NAME:ARITY"``, a path to a presentation file, or an inline presentation."""
    if isinstance(ref, dict):
        return presentation_from_json(ref)
    if not isinstance(ref, str):
        raise SchemaError("base_ref must be a string or an inline presentation")
    if ref.startswith("preset:"):
        parts = ref.split(":")
        arity = int(parts[2]) if len(parts) > 2 else 3
        return preset_presentation(parts[1], arity)
    path = ref if os.path.isabs(ref) or relative_to is None else os.path.join(relative_to, ref)
    return load_presentation(path)


def load_presentation(path: str) -> CanonicalPresentation:
    if path.startswith("preset:"):
        return resolve_base(path)
    obj = read_json(path)
    kind = obj.get("kind") if isinstance(obj, dict) else None
    if kind == "presentation":
        return presentation_from_json(obj)
    raise SchemaError(f"{path}: expected a presentation, found kind {kind!r}")


# ---------------------------------------------------------------------------
# measures


def measure_to_json(mu: WindowMeasure, base_ref=None) -> dict:
    ref = base_ref if base_ref is not None else (mu.base_ref or presentation_to_json(mu.base))
    tables = []
    for p in mu.base_types():
        rows = [{"diagram": facts_to_json(d), "prob": frac_str(w)} for d, w in mu.tables[p].items()]
        rows.sort(key=lambda row: json.dumps(row["diagram"]))
        tables.append({
            "size": mu.base.language.arity(p),
            "base_type": p,
            "base_diagram": facts_to_json(mu.base.diagram(p)),
            "rows": rows,
        })
    return {
        "kind": "measure",
        "base_ref": ref,
        "extra_language": language_to_json(mu.extra),
        "horizon": mu.horizon,
        "tables": tables,
    }


def measure_from_json(obj, relative_to: str | None = None) -> WindowMeasure:
    base = resolve_base(_require(obj, "base_ref"), relative_to)
    extra = language_from_json(_require(obj, "extra_language"))
    horizon = int(_require(obj, "horizon", int))
    lookup = {base.diagram(p): p for p, k in base.language if k <= horizon}
    tables = {}
    for t in _require(obj, "tables", list):
        p = t.get("base_type")
        if p is None:
            p = lookup.get(facts_from_json(_require(t, "base_diagram")))
        if p not in base.language:
            raise SchemaError(f"table for an unknown base type {p!r}")
        dist = {}
        for row in _require(t, "rows", list):
            d = facts_from_json(_require(row, "diagram"))
            dist[d] = dist.get(d, 0) + parse_frac(_require(row, "prob"))
        tables[p] = dist
    ref = obj["base_ref"] if isinstance(obj["base_ref"], str) else None
    return WindowMeasure(base, extra, horizon, tables, ref)


def load_measure(path: str) -> WindowMeasure:
    obj = read_json(path)
    if not isinstance(obj, dict) or obj.get("kind") != "measure":
        raise SchemaError(f"{path}: expected a measure")
    return measure_from_json(obj, os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# recipes


def type_to_json(v: OrderedQfType) -> dict:
    return {"vars": v.n, "atoms": facts_to_json(v.facts)}


def step_function_to_json(index, f: StepFunction) -> dict:
    cs = f.coordinates
    return {
        "index": index,
        "arity": f.arity,
        "grid": [{"coordinate": list(c), "breakpoints": [frac_str(b) for b in f.grid[c]]} for c in cs if f.grid[c]],
        "cells": [{"cell": list(key), "value_type": type_to_json(v)} for key, v in sorted(f.cells.items())],
    }


def step_function_from_json(obj, lang: Language) -> StepFunction:
    arity = int(_require(obj, "arity", int))
    grid = {}
    for g in obj.get("grid", []):
        grid[tuple(int(x) for x in _require(g, "coordinate", list))] = tuple(parse_frac(b) for b in _require(g, "breakpoints", list))
    cells = {}
    for c in _require(obj, "cells", list):
        vt = _require(c, "value_type", dict)
        try:
            cells[tuple(int(x) for x in _require(c, "cell", list))] = OrderedQfType(lang, int(vt["vars"]), facts_from_json(vt["atoms"]))
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"invalid cell value: {exc}") from None
    try:
        return StepFunction(arity, lang, grid, cells)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def recipe_to_json(recipe, base_ref=None) -> dict:
    if isinstance(recipe, SymRecipe):
        return {
            "kind": "sym",
            "target_language": language_to_json(recipe.language),
            "functions": [step_function_to_json(k, f) for k, f in sorted(recipe.functions.items())],
        }
    return {
        "kind": "aut",
        "base_ref": base_ref if base_ref is not None else presentation_to_json(recipe.base),
        "target_language": language_to_json(recipe.language),
        "functions": [step_function_to_json(p, recipe.functions[p]) for p in recipe.base.language.names if p in recipe.functions],
    }


def recipe_from_json(obj, relative_to: str | None = None):
    kind = _require(obj, "kind")
    lang = language_from_json(_require(obj, "target_language"))
    funcs = _require(obj, "functions", list)
    try:
        if kind == "sym":
            return SymRecipe(lang, {int(f["index"]): step_function_from_json(f, lang) for f in funcs})
        if kind == "aut":
            base = resolve_base(_require(obj, "base_ref"), relative_to)
            return AutRecipe(base, lang, {str(f["index"]): step_function_from_json(f, lang) for f in funcs})
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"invalid recipe: {exc}") from None
    raise SchemaError(f"recipe kind must be 'sym' or 'aut', not {kind!r}")


def load_recipe(path: str):
    obj = read_json(path)
    return recipe_from_json(obj, os.path.dirname(os.path.abspath(path)))


def load_any(path: str):
    """Decode a file by its ``kind`` field."""
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top level must be an object")
    kind = obj.get("kind")
    here = os.path.dirname(os.path.abspath(path))
    if kind == "structure":
        return structure_from_json(obj)
    if kind == "age":
        return age_from_json(obj)
    if kind == "presentation":
        return presentation_from_json(obj)
    if kind == "measure":
        return measure_from_json(obj, here)
    if kind in ("sym", "aut"):
        return recipe_from_json(obj, here)
    raise SchemaError(f"{path}: unknown kind {kind!r}")

