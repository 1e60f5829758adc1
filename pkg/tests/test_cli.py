import shutil

import pytest

from relchab.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_OK, EXIT_USAGE, run_command
from relchab.fixtures_io import parse_report

from conftest import DATA


def _run(capsys, *argv):
    code = run_command(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_first_order_example(capsys):
    code, out, _ = _run(capsys, "criterion", "--fixture", "x0_67", "--config", "3Q", "--prime", "19",
                        "--order", "first")
    assert code == EXIT_OK
    assert parse_report(out)["rank"] == ["2"]


def test_higher_order_example(capsys):
    code, out, _ = _run(capsys, "criterion", "--fixture", "x0_73", "--config", "3cinf", "--prime", "19",
                        "--order", "higher")
    assert code == EXIT_OK
    rep = parse_report(out)
    assert rep["verdict"] == ["pass"] and rep["scanned"] == [str(19 ** 3 - 1)]


def test_first_order_failure_exit_code(capsys):
    code, out, _ = _run(capsys, "criterion", "--fixture", "x0_73", "--config", "3c0", "--prime", "19")
    assert code == EXIT_FAIL
    assert parse_report(out)["verdict"] == ["fail"]


def test_picard_example(capsys):
    code, out, _ = _run(capsys, "picard", "--fixture", "x0_65", "--prime", "11", "--mode", "sample")
    assert code == EXIT_OK
    assert parse_report(out)["exponent_lower_bound"] == ["108780"]


def test_budget_exit_code(capsys):
    code, out, err = _run(capsys, "criterion", "--fixture", "x0_73", "--config", "3cinf", "--prime", "19",
                          "--order", "higher", "--budget", "100")
    assert code == EXIT_BUDGET and out == "" and "budget" in err


@pytest.mark.parametrize("argv", [
    [],
    ["criterion", "--fixture", "x0_67"],
    ["validate", "--fixture", "no_such_fixture"],
    ["criterion", "--fixture", "x0_67", "--config", "3Q", "--order", "third"],
    ["sieve", "--fixture", "x0_53"],
    ["sieve", "--fixture", "x0_53", "--degree", "4", "--primes", "5"],
    ["sieve", "--fixture", "x0_53", "--primes", "5", "--drop", "nonexistent"],
    ["sieve", "--fixture", "x0_53", "--primes", "5", "--forget", "5-2"],
    ["sieve", "--fixture", "x0_67", "--primes", "5"],
])
def test_usage_errors(capsys, argv):
    assert _run(capsys, *argv)[0] == EXIT_USAGE


def test_validate(capsys):
    code, out, _ = _run(capsys, "validate", "--fixture", "x0_53")
    rep = parse_report(out)
    assert code == EXIT_OK
    assert rep["status"] == ["ok"] and rep["genus"] == ["4"] and rep["mw_torsion"] == ["13"]


def test_fixture_directory_variable(capsys, monkeypatch, tmp_path):
    shutil.copy(DATA / "x0_61.fix", tmp_path / "custom.fix")
    monkeypatch.setenv("CHABAUTY_FIXTURE_DIR", str(tmp_path))
    code, out, _ = _run(capsys, "validate", "--fixture", "custom", "--shallow")
    assert code == EXIT_OK and "fixture=X0(61)" in out


def test_out_flag_and_no_stray_files(capsys, monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    args = ["criterion", "--fixture", "x0_67", "--config", "3Q", "--prime", "19"]
    _, out, _ = _run(capsys, *args)
    assert list(tmp_path.iterdir()) == []
    _, out2, _ = _run(capsys, *args, "--threads", "4", "--out", str(tmp_path / "r.txt"))
    assert out2 == out
    assert (tmp_path / "r.txt").read_text(encoding="utf-8") == out


def test_sieve_survivors_exit_code(capsys):
    code, out, err = _run(capsys, "sieve", "--fixture", "x0_53", "--primes", "5,7", "--drop", "t4a")
    assert code == EXIT_FAIL
    rep = parse_report(out)
    assert rep["outcome"] == ["survivors"]
    # progress lines go to standard error only
    assert "seconds=" in err and "seconds=" not in out
