import csv
import io
import json
import math
import shutil
import subprocess

import pytest

from openasep import cli
from openasep.asep import LaplaceSpec, ScalingInput, laplace_exact
from openasep.errors import NumericalError

EXPONENTS = ["--u", "0.8", "--v", "0.7", "--w", "1.5", "--r", "0.6"]


def _run(capsys, argv):
    code = cli.dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _csv_rows(text):
    lines = text.splitlines()
    assert lines[0].startswith("# openasep-schema: ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_aw_density_csv(capsys):
    code, out, _ = _run(capsys, ["aw", "density", "--v", "0.7", "--w", "1.5", "--u", "0.8", "--r", "0.6",
                                 "--n", "10000", "--t", "0.0", "--grid", "200"])
    assert code == 0
    rows = _csv_rows(out)
    assert len(rows) == 200
    assert list(rows[0]) == ["y", "density"]
    assert all(math.isfinite(float(r["density"])) and float(r["density"]) >= 0 for r in rows)


def test_check_laplace_identity_json(capsys):
    code, out, _ = _run(capsys, ["check", "laplace-identity", "--n", "6", *EXPONENTS, "--c", "1.0", "--x", "0.5"])
    assert code == 0
    rec = json.loads(out)
    assert set(rec) == {"lhs", "rhs", "gap"}
    assert rec["gap"] < 1e-6
    model = ScalingInput(0.8, 0.7, 1.5, 0.6, 6).model()
    assert rec["lhs"] == pytest.approx(laplace_exact(model, LaplaceSpec((0.5,), (1.0,))), abs=1e-15)


def test_limit_marginal_report(capsys):
    code, out, _ = _run(capsys, ["limit", "marginal", *EXPONENTS, "--t", "0", "--y", "2.0",
                                 "--n-list", "100,1000,10000,100000"])
    assert code == 0
    rows = _csv_rows(out)
    assert [int(r["n"]) for r in rows] == [100, 1000, 10000, 100000]
    errs = [float(r["rel_error"]) for r in rows]
    assert errs == sorted(errs, reverse=True)


@pytest.mark.parametrize(
    "argv",
    [
        ["cdh", "density", "--u", "0.8", "--v", "0.7", "--t", "0.3", "--grid", "20"],
        ["cdh", "atoms", "--u", "0.8", "--v", "-0.3", "--t", "0.0"],
        ["aw", "atoms", "--u", "0.8", "--v", "-0.3", "--w", "1.5", "--r", "0.6", "--n", "1000", "--t", "0"],
        ["check", "bw-identity", "--n", "2", *EXPONENTS, "--t", "0.7,1.3"],
        ["asep", "stationary", "--n", "4", *EXPONENTS],
        ["asep", "laplace", "--n", "4", *EXPONENTS, "--c", "0.5", "--x", "1.0"],
        ["asep", "simulate", "--n", "4", *EXPONENTS, "--horizon", "50", "--burn-in", "5"],
        ["limit", "atom", "--u", "0.8", "--v", "-0.3", "--w", "1.5", "--r", "0.6", "--t", "0",
         "--family", "v", "--n-list", "100,1000"],
        ["limit", "transition", *EXPONENTS, "--kind", "cc", "--s", "0.1", "--t", "0.4",
         "--src", "c:1.3", "--dst", "c:0.9", "--n-list", "100,1000"],
        ["kpz", "oracle", "--u", "0.8", "--v", "0.7", "--c", "0.5", "--paths", "500", "--mesh", "32"],
    ],
)
def test_commands_succeed_with_finite_output(capsys, argv):
    code, out, err = _run(capsys, argv + ["--format", "json"])
    assert code == 0, err
    body = json.loads(out)
    rows = body if isinstance(body, list) else [body]
    for row in rows:
        for v in row.values():
            if isinstance(v, float):
                assert math.isfinite(v)


def test_window_violation_names_constraint(capsys):
    code, out, err = _run(capsys, ["limit", "marginal", *EXPONENTS, "--t", "1.3", "--y", "2.0", "--n-list", "100"])
    assert code == 1 and out == ""
    rec = json.loads(err)
    assert rec["error"] == "validation"
    assert "t must lie in (-2w, 2r)" in rec["message"]


@pytest.mark.parametrize(
    "argv",
    [
        ["aw", "density", "--u", "0.8"],
        ["aw", "nothing"],
        ["asep", "stationary", "--n", "4", *EXPONENTS, "--bogus", "1"],
        ["asep", "stationary", "--n", "4", "--u", "0.2", "--v", "-0.5", "--w", "1", "--r", "1"],
        ["check", "bw-identity", "--n", "2", *EXPONENTS, "--t", "1.3,0.7"],
    ],
)
def test_validation_errors_exit_one(capsys, argv):
    code, _, err = _run(capsys, argv)
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"] == "validation"


def test_numerical_failure_exit_two(capsys, monkeypatch):
    def boom(cfg, p):
        raise NumericalError("did not converge")

    monkeypatch.setitem(cli.HANDLERS, "asep stationary", boom)
    code, out, err = _run(capsys, ["asep", "stationary", "--n", "3", *EXPONENTS])
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "numerical"


def test_nan_never_reaches_output(capsys, monkeypatch):
    monkeypatch.setitem(cli.HANDLERS, "asep stationary",
                        lambda cfg, p: cli.Table("broken", ("x",), [{"x": float("nan")}]))
    code, out, _ = _run(capsys, ["asep", "stationary", "--n", "3", *EXPONENTS])
    assert code == 2 and out == ""


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("OPENASEP_OUTPUT_DIR", str(tmp_path))
    code, out, _ = _run(capsys, ["asep", "stationary", "--n", "3", *EXPONENTS, "--output", "sub/occ.csv"])
    assert code == 0 and out == ""
    text = (tmp_path / "sub" / "occ.csv").read_text()
    assert text.startswith("# openasep-schema: ")


def test_identical_config_is_byte_identical(tmp_path, capsys):
    argv = ["asep", "simulate", "--n", "5", *EXPONENTS, "--horizon", "100", "--burn-in", "5", "--seed", "7"]
    outs = []
    for name in ("a.csv", "b.csv"):
        assert cli.dispatch(argv + ["--output", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    assert cli.dispatch(argv[:-1] + ["8", "--output", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "c.csv").read_bytes() != outs[0]


@pytest.mark.skipif(shutil.which("openasep") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(
        ["openasep", "asep", "stationary", "--n", "2", *EXPONENTS, "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert len(json.loads(proc.stdout)) == 2
