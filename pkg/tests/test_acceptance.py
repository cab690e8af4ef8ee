"""One test per acceptance criterion; each prints a PASS/FAIL line with its timing and limit."""

import time
from fractions import Fraction

import pytest

from autrecipe import verify
from autrecipe.cli import main
from autrecipe.presets import rado
from autrecipe.recipe import erdos_renyi, pushforward

SEED = 0
SAMPLES = 100_000
ALPHA = Fraction(1, 1000)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, elapsed, limit, detail):
        status = "PASS" if ok and elapsed < limit else "FAIL"
        with capsys.disabled():
            print(f"\n[{status}] criterion {number:>2}: {name} ({elapsed:.2f} s, limit {limit} s) {detail}")
        assert ok, detail
        assert elapsed < limit, f"took {elapsed:.2f} s, limit {limit} s"

    return emit


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def test_01_freeness(report, capsys):
    def run():
        codes = (main(["canon", "free-check", "preset:rado:4"]), main(["canon", "free-check", "preset:triangle-free:3"]))
        capsys.readouterr()
        ok, detail = verify.check_freeness()
        return ok and codes == (0, 3), f"exit codes {codes}; {detail}"

    (ok, detail), t = timed(run)
    report(1, "freeness", ok, t, 5, detail)


def test_02_free_completion(report):
    (ok, detail), t = timed(verify.check_free_completion)
    report(2, "free completion", ok, t, 5, detail)


def test_03_minimality(report):
    (ok, detail), t = timed(verify.check_minimality)
    report(3, "minimality of the free completion", ok, t, 30, detail)


def test_04_trivial_dcl(report):
    (ok, detail), t = timed(verify.check_dcl)
    report(4, "trivial dcl via strong amalgamation", ok, t, 10, detail)


def test_05a_erdos_renyi_exact_table(report):
    table, t = timed(lambda: pushforward(erdos_renyi(rado(3)), 3).tables["D3"])
    ok = len(table) == 8 and set(table.values()) == {Fraction(1, 8)}
    report(5, "Erdos-Renyi exact table", ok, t, 1, f"{len(table)} diagrams, values {sorted(set(table.values()))}")


def test_05b_erdos_renyi_sampler(report):
    (ok, detail), t = timed(verify.check_erdos_renyi, SAMPLES, ALPHA, SEED)
    report(5, f"Erdos-Renyi sampler vs chi-square at alpha {ALPHA}", ok, t, 60, detail)


def test_06_region_maps(report):
    (ok, detail), t = timed(verify.check_region_maps, SEED, 100)
    report(6, "region maps", ok, t, 5, detail)


def test_07_merge_calculus(report):
    (ok, detail), t = timed(verify.check_merge, SEED, 10)
    report(7, "merge calculus", ok, t, 30, detail)


def test_08_recipe_invariance(report):
    (ok, detail), t = timed(verify.check_recipe_invariance, SEED, 10)
    report(8, "recipe invariance", ok, t, 30, detail)


def test_09_round_trip(report):
    (ok, detail), t = timed(verify.check_round_trip, SEED, 10)
    report(9, "extension and composition round trip", ok, t, 30, detail)


def test_10_type_machinery(report):
    (ok, detail), t = timed(verify.check_types)
    report(10, "type machinery", ok, t, 1, detail)


def test_11_pi_system(report):
    (ok, detail), t = timed(verify.check_pi_system)
    report(11, "pi-system extension", ok, t, 1, detail)


def test_12_determinism(report, tmp_path, capsys):
    recipe = tmp_path / "er.json"

    def run():
        main(["recipe", "erdos-renyi", "preset:rado:3", "-o", str(recipe)])
        outputs = []
        for i, threads in enumerate(("1", "1", "8")):
            path = tmp_path / f"run{i}.jsonl"
            code = main(["--seed", "42", "--count", "2000", "--threads", threads,
                         "recipe", "sample", str(recipe), "--window", "4", "-o", str(path)])
            outputs.append((code, path.read_bytes()))
        capsys.readouterr()
        same = len({o for _, o in outputs}) == 1 and all(c == 0 for c, _ in outputs)
        return same, f"{len(outputs[0][1])} bytes, identical over two runs and threads 1 and 8: {same}"

    (ok, detail), t = timed(run)
    report(12, "determinism of recipe sample", ok, t, 10, detail)
