import json
import math
import subprocess
import sys

import pytest

from prefattach.cli import EXIT_BUDGET, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from prefattach.entropy import exact_entropy
from prefattach.model import admissible_check, decode_graph


def run(argv, capsys=None):
    code = main(argv)
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def test_generate_pag(tmp_path, capsys):
    path = tmp_path / "g.pag"
    code, out = run(["generate", "-m", "3", "-n", "1000", "--seed", "7", "-o", str(path)], capsys)
    assert code == EXIT_OK and "wrote" in out.out
    g = decode_graph(path.read_bytes())
    assert (g.m, g.n, g.seed) == (3, 1000, 7) and admissible_check(g)
    assert not list(tmp_path.glob(".g.pag.*"))  # temp file renamed away


def test_generate_to_stdout_json(capsys):
    code, out = run(["generate", "-m", "2", "-n", "5", "--seed", "0x10", "--json"], capsys)
    payload = json.loads(out.out)
    assert code == EXIT_OK and payload["seed"] == 16 and payload["degree_sum"] == 18


def test_exact_entropy_json(capsys):
    code, out = run(["entropy", "-m", "1", "-n", "3", "--exact", "--json"], capsys)
    payload = json.loads(out.out)
    assert code == EXIT_OK and payload["method"] == "Exact"
    assert payload["value_nats"] == pytest.approx(-(0.75 * math.log(0.75) + 0.25 * math.log(0.25)), abs=1e-12)
    assert payload["value_nats"] == exact_entropy(1, 3).value


def test_entropy_bits(capsys):
    _, out = run(["entropy", "-m", "1", "-n", "3", "--exact", "--bits"], capsys)
    payload = json.loads(out.out)
    assert payload["unit"] == "bits" and payload["value"] == pytest.approx(payload["value_nats"] / math.log(2))


def test_entropy_modes(capsys):
    _, out = run(["entropy", "-m", "2", "-n", "1000", "--asymptotic", "--form", "rederived"], capsys)
    assert json.loads(out.out)["form"] == "rederived"
    _, out = run(["entropy", "-m", "2", "-n", "50", "--samples", "20", "--seed", "3"], capsys)
    payload = json.loads(out.out)
    assert payload["method"] == "MonteCarlo" and payload["samples"] == 20 and payload["stderr"] > 0
    _, out = run(["entropy", "-m", "3", "-n", "60", "--structural", "--samples", "4"], capsys)
    payload = json.loads(out.out)
    assert payload["lower"] <= payload["upper"]


def test_budget_exit(capsys):
    code, out = run(["entropy", "-m", "2", "-n", "12", "--exact", "--budget", "1000"], capsys)
    assert code == EXIT_BUDGET and "budget" in out.err


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "-m", "0", "-n", "5"],
        ["generate", "-m", "1"],
        ["generate", "-m", "1", "-n", "5", "--bogus"],
        ["generate", "-m", "1", "-n", "5", "--format", "csv"],
        ["generate", "-m", "1", "-n", "5", "--json", "--format", "pag"],
        ["entropy", "-m", "1", "-n", "5", "--exact", "--asymptotic"],
        ["symmetry", "-m", "1", "-n", "5", "--k", "9"],
        ["dag", "-m", "1", "-n", "20", "--brute-force"],
        ["dag", "-m", "1", "-n", "20", "--eps", "2"],
        ["nonsense"],
    ],
)
def test_usage_errors(argv, tmp_path, capsys):
    out = tmp_path / "x.json"
    try:
        code = main(argv + ["-o", str(out)] if argv[0] != "nonsense" else argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert not out.exists()


def test_missing_directory_is_io_error(tmp_path, capsys):
    code, out = run(["generate", "-m", "1", "-n", "5", "-o", str(tmp_path / "no" / "g.pag")], capsys)
    assert code == EXIT_IO and "does not exist" in out.err


def test_bad_input_file(tmp_path, capsys):
    bad = tmp_path / "bad.pag"
    bad.write_text("pag v1 m=1 n=3 mode=d seed=-\n2: 1\n3: 3\n")
    code, out = run(["symmetry", "-m", "1", "-n", "3", "--input", str(bad)], capsys)
    assert code == EXIT_VALIDATION and "line 3" in out.err


def test_symmetry_input_round_trip(tmp_path, capsys):
    path = tmp_path / "g.pag"
    run(["generate", "-m", "1", "-n", "3", "-o", str(path)], capsys)
    code, out = run(["symmetry", "-m", "1", "-n", "3", "--input", str(path)], capsys)
    assert code == EXIT_OK and json.loads(out.out)["aut_order"] == 2


def test_verify(capsys):
    code, out = run(["verify", "--max-n", "4"], capsys)
    payload = json.loads(out.out)
    assert code == EXIT_OK and payload["passed"]
    assert {s["suite"] for s in payload["suites"]} == {"aut_equivalence", "normalization", "gamma_adm_aut"}
    assert out.err.count("PASS") == 3


def test_degrees_csv_and_check(tmp_path, capsys):
    path = tmp_path / "deg.csv"
    code, _ = run(["degrees", "-m", "2", "-n", "2000", "--trials", "20", "--d-max", "8", "-o", str(path), "--check"], capsys)
    lines = path.read_text().splitlines()
    assert code == EXIT_OK and lines[0] == "t,d,empirical_mean,empirical_stderr,theory,ratio" and len(lines) == 8
    code, out = run(["degrees", "-m", "2", "-n", "2000", "--trials", "5", "--slack", "-1", "--check", "--json"], capsys)
    assert code == EXIT_VALIDATION and "FAIL" in out.err


def test_dag_brute_force(capsys):
    code, out = run(["dag", "-m", "2", "-n", "6", "--trials", "4", "--brute-force", "--eps", "0", "--k", "1", "--json"], capsys)
    payload = json.loads(out.out)
    assert code == EXIT_OK and all(r["identity_holds"] for r in payload["trials"])


def _artifacts(tmp_path, tag, extra=()):
    d = tmp_path / tag
    d.mkdir()
    commands = [
        ["generate", "-m", "3", "-n", "500", "--seed", "11", "-o", "g.pag"],
        ["generate", "-m", "3", "-n", "50", "--seed", "11", "--json", "-o", "g.json"],
        ["symmetry", "-m", "3", "-n", "200", "--trials", "6", "--seed", "5", "-o", "s.json"],
        ["symmetry", "-m", "3", "-n", "200", "--trials", "6", "--seed", "5", "--method", "certificate", "-o", "c.json"],
        ["entropy", "-m", "2", "-n", "100", "--samples", "10", "--seed", "5", "-o", "e.json"],
        ["dag", "-m", "2", "-n", "300", "--trials", "3", "--seed", "5", "--format", "csv", "-o", "d.csv"],
    ]
    for argv in commands:
        assert main([*argv, *extra]) == EXIT_OK
    return {p.name: p.read_bytes() for p in d.iterdir()}, d


def test_byte_reproducible(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PREFATTACH_OUTPUT_DIR", str(tmp_path / "a"))
    first, _ = _artifacts(tmp_path, "a")
    monkeypatch.setenv("PREFATTACH_OUTPUT_DIR", str(tmp_path / "b"))
    second, _ = _artifacts(tmp_path, "b")
    assert first == second and len(first) == 6


def test_jobs_do_not_change_output(tmp_path, monkeypatch, capsys):
    argv = ["symmetry", "-m", "2", "-n", "100", "--trials", "5", "--seed", "3"]
    main([*argv, "-o", str(tmp_path / "one.json")])
    monkeypatch.setenv("PREFATTACH_JOBS", "2")
    main([*argv, "-o", str(tmp_path / "two.json")])
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
    monkeypatch.setenv("PREFATTACH_JOBS", "zero")
    assert main([*argv, "-o", str(tmp_path / "x.json")]) == EXIT_USAGE


def test_timing_is_opt_in(capsys):
    _, out = run(["symmetry", "-m", "2", "-n", "50", "--timing"], capsys)
    assert "elapsed_ms" in json.loads(out.out)
    _, out = run(["symmetry", "-m", "2", "-n", "50"], capsys)
    assert "elapsed_ms" not in json.loads(out.out)


def test_checkpoint_resume(tmp_path, capsys):
    ck = tmp_path / "ck.jsonl"
    argv = ["dag", "-m", "2", "-n", "400", "--seed", "9", "--checkpoint", str(ck)]
    main([*argv, "--trials", "3", "-o", str(tmp_path / "partial.json")])
    assert len(ck.read_text().splitlines()) == 3
    main([*argv, "--trials", "6", "-o", str(tmp_path / "resumed.json")])
    assert len(ck.read_text().splitlines()) == 6
    main(["dag", "-m", "2", "-n", "400", "--seed", "9", "--trials", "6", "-o", str(tmp_path / "fresh.json")])
    assert (tmp_path / "resumed.json").read_bytes() == (tmp_path / "fresh.json").read_bytes()
    code = main(["dag", "-m", "3", "-n", "400", "--seed", "9", "--trials", "6", "--checkpoint", str(ck)])
    assert code == EXIT_USAGE and "different configuration" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "prefattach", "generate", "-m", "1", "-n", "3", "--seed", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("pag v1 m=1 n=3 mode=d seed=")
    proc = subprocess.run([sys.executable, "-m", "prefattach", "generate"], capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_USAGE
