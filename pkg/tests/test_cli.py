import csv
import shutil
import subprocess
import sys

import pytest

from inkstream.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def k1(tmp_path):
    p = tmp_path / "k1.txt"
    p.write_text("a\nb | c\n!a & !b\nd\n")
    return str(p)


@pytest.fixture
def k2(tmp_path):
    p = tmp_path / "k2.txt"
    p.write_text("a\n!a\nb\n!b\n")
    return str(p)


@pytest.mark.parametrize("measure,expected", [("mi", "1"), ("mic", "0.5"), ("c", "1"), ("eta", "0.5"), ("hs", "1")])
def test_measure(k1, capsys, measure, expected):
    assert main(["measure", "--kb", k1, "--measure", measure]) == EXIT_OK
    assert capsys.readouterr().out.strip() == expected


def test_measure_infinite(tmp_path, capsys):
    p = tmp_path / "f.txt"
    p.write_text("a\nfalse\n")
    assert main(["measure", "--kb", str(p), "--measure", "hs"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "inf"


def test_measure_dimacs(tmp_path, capsys):
    p = tmp_path / "k.cnf"
    p.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert main(["measure", "--kb", str(p), "--measure", "mi"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "1"


def test_usage_errors(k1):
    assert main(["measure", "--kb", k1, "--measure", "nope"]) == EXIT_USAGE
    assert main(["measure", "--kb", k1]) == EXIT_USAGE
    assert main(["stream", "--kb", k1, "--measure", "window:mi:x:max", "--iterations", "5"]) == EXIT_USAGE
    assert main(["stream", "--kb", k1, "--measure", "window:mi:2:max", "--iterations", "0"]) == EXIT_USAGE
    assert main(["--sat", "glucose", "measure", "--kb", k1, "--measure", "mi"]) == EXIT_USAGE


def test_argparse_exit_codes(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_input_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("a &\n")
    dup = tmp_path / "dup.txt"
    dup.write_text("a\na\n")
    assert main(["measure", "--kb", str(bad), "--measure", "mi"]) == EXIT_INPUT
    assert main(["measure", "--kb", str(dup), "--measure", "mi"]) == EXIT_INPUT
    assert main(["measure", "--kb", str(tmp_path / "missing.txt"), "--measure", "mi"]) == EXIT_INPUT


def test_budget_errors(tmp_path):
    wide = tmp_path / "wide.txt"
    wide.write_text(" & ".join(f"x{i}" for i in range(13)) + "\n")
    assert main(["measure", "--kb", str(wide), "--measure", "eta"]) == EXIT_BUDGET


def test_stream_trace(k2, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(["stream", "--kb", k2, "--measure", "window:mi:inf:max", "--iterations", "250",
                 "--seed", "3", "--trace", str(out)])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == "2"
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["measure", "kb_id", "seed", "iteration", "value", "elapsed_micros", "timeout_flag"]
    assert [r[3] for r in rows[1:]] == ["100", "200", "250"]
    assert rows[1][:3] == ["window:mi:inf:max", "k2", "3"]


def test_stream_population(k2, capsys):
    assert main(["stream", "--kb", k2, "--measure", "c:4:smooth:0.75:recip", "--iterations", "40"]) == EXIT_OK
    assert float(capsys.readouterr().out) >= 0


def test_stream_contradictory_formula(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("a\nb & !b\n")
    assert main(["stream", "--kb", str(p), "--measure", "hs:2:max:recip", "--iterations", "5"]) == EXIT_INPUT


def test_sample(tmp_path, capsys):
    out = tmp_path / "s.txt"
    assert main(["sample", "--formulas", "12", "--atoms", "6", "--target", "hs:2", "--seed", "1",
                 "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 12
    assert main(["measure", "--kb", str(out), "--measure", "hs"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "2"
    assert main(["sample", "--formulas", "3", "--atoms", "3", "--clause-length", "1..2", "--dimacs"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("p cnf 3 3")


def test_sample_errors():
    assert main(["sample", "--formulas", "100", "--atoms", "2"]) == EXIT_USAGE
    assert main(["sample", "--formulas", "5", "--atoms", "3", "--target", "eta:1"]) == EXIT_USAGE
    assert main(["sample", "--formulas", "5", "--atoms", "3", "--clause-length", "x"]) == EXIT_USAGE


def test_bench(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('experiment = "runtime"\nmeasures = ["hs:2:max:recip"]\nnum_formulas = 10\nnum_atoms = 5\n'
                   'trials = 1\niterations = 20\nprobe_cadence = 10\n')
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert (out / "records.csv").exists() and (out / "summary.txt").exists()
    assert "runtime experiment" in capsys.readouterr().out


def test_bench_errors(tmp_path):
    assert main(["bench", "--config", str(tmp_path / "none.toml")]) == EXIT_INPUT
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "runtime"\nmeasures = ["hs:2:avg:recip"]\n')
    assert main(["bench", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    unknown = tmp_path / "unknown.toml"
    unknown.write_text("color = 1\n")
    assert main(["bench", "--config", str(unknown)]) == EXIT_INPUT


def test_external_solver_flag(k2, tmp_path, capsys):
    missing = tmp_path / "nosuchsolver"
    assert main(["--sat", f"external:{missing}", "measure", "--kb", k2, "--measure", "mi"]) == EXIT_USAGE


@pytest.mark.skipif(shutil.which("inkstream") is None, reason="console script not installed")
def test_console_script(k1):
    proc = subprocess.run(["inkstream", "measure", "--kb", k1, "--measure", "mic"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.5"


def test_module_entry(k1):
    proc = subprocess.run([sys.executable, "-m", "inkstream.cli", "measure", "--kb", k1, "--measure", "mi"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "1"
