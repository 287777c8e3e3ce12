import json
import math

import pytest

from cli_cases import commands, invoke, write_inputs
from tailmix.cli import fmt, read_series, run


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    return write_inputs(tmp_path_factory.mktemp("cli"))


def test_returns_from_stdin():
    res = invoke(["returns", "--in", "-"], stdin=b"100\n110\n")
    assert res.returncode == 0
    assert res.stdout == b"0.095310179804324935\n"
    assert float(res.stdout) == math.log(1.1)


def test_returns_arithmetic(monkeypatch, capsys):
    import io
    import sys

    monkeypatch.setattr(sys, "stdin", io.StringIO("100\n110\n"))
    assert run(["returns", "--in", "-", "--kind", "arithmetic"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.1, rel=1e-15)


def test_fmt_round_trips():
    for v in (0.1, math.pi, 1e-300, -2.5e17):
        assert float(fmt(v)) == v
    assert fmt(float("nan")) == "nan"


def test_read_series_header_and_two_columns(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("date,price\n2020-01-01,1.5\n2020-01-02,2.5\n")
    assert read_series(str(f)).tolist() == [1.5, 2.5]
    g = tmp_path / "b.csv"
    g.write_text("3\n4\n")
    assert read_series(str(g)).tolist() == [3.0, 4.0]


def test_usage_errors_exit_1(capsys):
    assert run([]) == 1
    assert run(["fit", "--in", "x.csv", "--model", "nope"]) == 1
    assert run(["diagnose", "--in", "x.csv"]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    assert run(["describe", "--in", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "neg.csv"
    bad.write_text("1\n-1\n2\n")
    assert run(["returns", "--in", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "returns" in err and "Traceback" not in err


def test_model_needed_for_model_risk(files, capsys):
    assert run(["risk", "--in", files["x"], "--alpha", "0.9", "--method", "model"]) == 1


def test_support_violation_reported(files, capsys):
    neg = run(["fit", "--in", files["x"], "--model", "gammaGPD", "--loss"])
    assert neg == 2
    assert "SupportViolationError" in capsys.readouterr().err


def test_out_file_matches_stdout(files, tmp_path, capsys):
    out = tmp_path / "o.json"
    assert run(["risk", "--in", files["x"], "--alpha", "0.95", "--out", str(out)]) == 0
    assert run(["risk", "--in", files["x"], "--alpha", "0.95"]) == 0
    assert out.read_text() == capsys.readouterr().out


def test_fit_json_shape(files, capsys):
    assert run(["fit", "--in", files["x"], "--model", "GNG", "--grid", "0.85,0.9"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["model"] == "GNG"
    assert "lower_tail" in d["parameters"] and "upper_tail" in d["parameters"]
    assert len(d["thresholds"]) == 2 and d["converged"] is True
    assert all(set(row) == {"thresholds", "log_likelihood"} for row in d["profile"])
    assert d["log_likelihood"] == max(row["log_likelihood"] for row in d["profile"])


def test_risk_empirical_values(tmp_path, capsys):
    f = tmp_path / "h.csv"
    f.write_text("".join(f"{i}\n" for i in range(1, 101)))
    assert run(["risk", "--in", str(f), "--alpha", "0.95"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert (d["var"], d["es"]) == (95.0, 97.5)


def test_diagnose_skips_go_to_stderr(tmp_path, capsys):
    f = tmp_path / "s.csv"
    f.write_text("1\n2\n3\n")
    assert run(["diagnose", "--in", str(f), "--mrl", "--grid", "1.5,2.5"]) == 0
    cap = capsys.readouterr()
    rows = cap.out.splitlines()
    assert rows[0] == "u,estimate,ci_low,ci_high,n_exceed"
    assert len(rows) == 2 and rows[1].startswith("1.5,1,") and rows[1].endswith(",2")
    assert "u=2.5" in cap.err


@pytest.mark.parametrize("name", ["returns", "describe", "risk-empirical", "risk-mc", "diagnose-mrl"])
def test_quick_commands_repeatable(files, name):
    args = commands(files)[name]
    a, b = invoke(args), invoke(args)
    assert a.returncode == 0, a.stderr
    assert a.stdout == b.stdout
