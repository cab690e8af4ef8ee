import json
import random
from fractions import Fraction

import pytest

from autrecipe import jsonio
from autrecipe.cli import main
from autrecipe.generators import COLORING, random_aut_recipe, random_sym_recipe
from autrecipe.lang import Language
from autrecipe.measure import product_measure
from autrecipe.presets import rado, triangle_free
from autrecipe.recipe import pushforward


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_presentation_round_trip():
    for pres in (rado(3), triangle_free(3), jsonio.preset_presentation("free-completion-triangle-free", 3)):
        text = jsonio.dumps(jsonio.presentation_to_json(pres))
        back = jsonio.presentation_from_json(json.loads(text))
        assert back.language == pres.language and back.table == pres.table
        assert jsonio.dumps(jsonio.presentation_to_json(back)) == text


def test_measure_round_trip_is_byte_identical():
    mu = product_measure(rado(3), COLORING, 3, {"Red": Fraction(1, 3)})
    text = jsonio.dumps(jsonio.measure_to_json(mu, "preset:rado:3"))
    back = jsonio.measure_from_json(json.loads(text))
    assert back.same_tables(mu)
    assert jsonio.dumps(jsonio.measure_to_json(back, "preset:rado:3")) == text


def test_recipe_round_trip():
    rng = random.Random(0)
    for recipe, ref in (
        (random_aut_recipe(triangle_free(3), rng), "preset:triangle-free:3"),
        (random_sym_recipe(Language.of(("Red", 1), ("F", 2)), rng), None),
    ):
        text = jsonio.dumps(jsonio.recipe_to_json(recipe, ref))
        back = jsonio.recipe_from_json(json.loads(text))
        assert pushforward(back, 2).same_tables(pushforward(recipe, 2))
        assert jsonio.dumps(jsonio.recipe_to_json(back, ref)) == text


def test_fractions_are_exact_strings():
    assert jsonio.frac_str(Fraction(2, 6)) == "1/3"
    assert jsonio.parse_frac("1/3") == Fraction(1, 3)
    with pytest.raises(jsonio.SchemaError):
        jsonio.parse_frac("0.3.3")


def test_cli_free_check(capsys):
    assert run(capsys, "canon", "free-check", "preset:rado:4")[0] == 0
    code, _, err = run(capsys, "canon", "free-check", "preset:triangle-free:3")
    assert code == 3 and "E" in err


def test_cli_erdos_renyi_pushforward(tmp_path, capsys):
    path = tmp_path / "er.json"
    assert run(capsys, "recipe", "erdos-renyi", "preset:rado:3", "-o", str(path))[0] == 0
    code, out, _ = run(capsys, "recipe", "pushforward", str(path), "--window", "3")
    rows = [line.split("\t") for line in out.strip().splitlines()]
    assert code == 0 and len(rows) == 8 and {r[-1] for r in rows} == {"1/8"}


def test_cli_merge_and_eval(tmp_path, capsys):
    mu, nu, er = tmp_path / "mu.json", tmp_path / "nu.json", tmp_path / "er.json"
    assert run(capsys, "measure", "build", "--base", "preset:rado:3", "--extra", "Red:1", "--prob", "Red=1/3",
               "-o", str(mu))[0] == 0
    assert run(capsys, "recipe", "erdos-renyi", "preset:rado:3", "-o", str(er))[0] == 0
    assert run(capsys, "recipe", "pushforward", str(er), "--window", "3", "--json", "-o", str(nu))[0] == 0
    merged = tmp_path / "merged.json"
    assert run(capsys, "measure", "merge", str(mu), str(nu), "-o", str(merged))[0] == 0
    code, out, _ = run(capsys, "measure", "eval", str(merged), "--type", "D2", "E(0,1) & Red(0) & !Red(1)")
    assert code == 0 and out.strip() == "1/9"


def test_cli_samples_repeat_across_threads(tmp_path, capsys):
    er = tmp_path / "er.json"
    run(capsys, "recipe", "erdos-renyi", "preset:rado:3", "-o", str(er))
    outs = [run(capsys, "--seed", "5", "--count", "30", "--threads", t, "recipe", "sample", str(er), "--window", "4")[1]
            for t in ("1", "8", "1")]
    assert outs[0] == outs[1] == outs[2]
    lines = outs[0].strip().splitlines()
    assert len(lines) == 31 and all("facts" in json.loads(x) for x in lines[1:])


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "measure", "check", str(bad))[0] == 1
    er = tmp_path / "er.json"
    run(capsys, "recipe", "erdos-renyi", "preset:rado:3", "-o", str(er))
    assert run(capsys, "recipe", "sample", str(er), "--window", "20")[0] == 2
    code, _, err = run(capsys, "age", "check", "preset:successor", "--bound", "3")
    assert code == 3 and err.strip()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon": -1}))
    assert run(capsys, "--config", str(cfg), "canon", "free-check", "preset:rado:3")[0] == 1
