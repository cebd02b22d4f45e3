import json
import subprocess
import sys

import numpy as np
import pytest

from bisconcave.cli import INFEASIBLE_CONCLUSION, OUTPUT_ENV, ingest_csv, main
from bisconcave.errors import InputError
from bisconcave.schema import validate_report

FAST = ["--mc-reps", "2000"]


def _csv(tmp_path, lines, name="data.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n")
    return str(p)


def _cauchy_csv(tmp_path, n=80, seed=2):
    x = np.random.default_rng(seed).standard_cauchy(n)
    return _csv(tmp_path, ["value"] + [repr(float(v)) for v in x])


def _report(path):
    data = json.loads(path.read_text())
    validate_report(data)
    return data


def test_band_from_csv_with_header(tmp_path):
    out = tmp_path / "o"
    assert main(["band", "--input", _cauchy_csv(tmp_path), "--out", str(out)] + FAST) == 0
    rep = _report(out / "band.json")
    assert rep["input"]["n"] == 80 and rep["band"]["kind"] == "ks"
    rows = (out / "band_grid.csv").read_text().splitlines()
    assert rows[0] == "x,ecdf,band_lower,band_upper" and len(rows) == 513


def test_outputs_byte_identical(tmp_path):
    data = _cauchy_csv(tmp_path)
    for d in ("a", "b"):
        assert main(["refine", "--input", data, "--s-star", "-1", "--out", str(tmp_path / d)] + FAST) == 0
    for f in ("refine.json", "refine_grid.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_refine_feasible_and_infeasible(tmp_path):
    assert main(["refine", "--family", "student_t:r=1", "--n", "100", "--s-star", "-1",
                 "--out", str(tmp_path / "ok")] + FAST) == 0
    rep = _report(tmp_path / "ok" / "refine.json")
    assert rep["feasible"] and rep["status"] == "ok" and rep["band"]["s_star"] == -1.0
    code = main(["refine", "--family", "gaussian_mixture:delta=4", "--n", "2000", "--s-star", "1",
                 "--out", str(tmp_path / "bad")] + FAST)
    assert code == 1
    rep = _report(tmp_path / "bad" / "refine.json")
    assert rep["status"] == "infeasible" and rep["conclusion"] == INFEASIBLE_CONCLUSION
    assert not (tmp_path / "bad" / "refine_grid.csv").exists()


def test_wks_band(tmp_path):
    assert main(["band", "--family", "student_t:r=2", "--n", "60", "--band", "wks", "--gamma-w", "0.3",
                 "--out", str(tmp_path)] + FAST) == 0
    assert _report(tmp_path / "band.json")["band"]["gamma_w"] == 0.3


def test_estimate_sstar(tmp_path):
    assert main(["estimate-sstar", "--family", "student_t:r=1", "--n", "150", "--rho", "0.9",
                 "--tol", "0.01", "--out", str(tmp_path)] + FAST) == 0
    rep = _report(tmp_path / "estimate-sstar.json")
    assert rep["s_hat"] <= rep["s_bar"] <= 1
    assert (tmp_path / "omega_curve.csv").read_text().startswith("s_star,omega\n")


def test_analytic_commands(tmp_path):
    assert main(["check", "--family", "student_t:r=1", "--s-star", "-1", "--out", str(tmp_path)]) == 0
    assert _report(tmp_path / "check.json")["holds"] is True
    assert main(["check", "--family", "student_t:r=1", "--s-star", "-0.9", "--out", str(tmp_path)]) == 0
    assert _report(tmp_path / "check.json")["holds"] is False
    assert main(["cr", "--family", "pareto:a=2,b=1", "--out", str(tmp_path)]) == 0
    assert _report(tmp_path / "cr.json")["gamma_bar"] == pytest.approx(1.5)
    assert main(["max-sstar", "--family", "student_t:r=2", "--tol", "1e-4", "--out", str(tmp_path)]) == 0
    assert _report(tmp_path / "max-sstar.json")["s_star"] == pytest.approx(-0.5, abs=1e-4)
    assert main(["threshold", "--family", "gaussian_mixture", "--lo", "1", "--hi", "2",
                 "--out", str(tmp_path)]) == 0
    assert 1.34 < _report(tmp_path / "threshold.json")["threshold"] < 1.35


def test_simulate(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "student_t:r=1", "n": [40], "s_star": [-1.0], "replications": 5,
                               "quantile_reps": 2000, "output": "cov.csv"}))
    assert main(["simulate", "--config", str(cfg), "--workers", "1", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "cov.csv").read_text().startswith("n,s_star")
    _report(tmp_path / "o" / "simulate.json")


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["cr", "--family", "student_t:r=1"]) == 0
    assert (tmp_path / "env" / "cr.json").exists()


@pytest.mark.parametrize("lines", [["1.0", "nan", "2.0"], ["1.0", "abc"], ["1.0"], ["x", "1", "inf"],
                                   ["1,2", "3,4"]])
def test_bad_input_exit_code(tmp_path, lines, capsys):
    assert main(["band", "--input", _csv(tmp_path, lines), "--out", str(tmp_path)] + FAST) == 2
    assert "error:" in capsys.readouterr().err


def test_other_input_errors(tmp_path):
    assert main(["band", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert main(["band", "--family", "student_t:r=1", "--out", str(tmp_path)]) == 2
    assert main(["check", "--family", "student_t:r=-1", "--s-star", "0", "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{\n  \"n\": [10],\n  oops\n}")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_ingest_csv_examples(tmp_path):
    assert ingest_csv(_csv(tmp_path, ["3", "1"])).n == 2
    assert ingest_csv(_csv(tmp_path, ["header", "1", "", "2"])).n == 2
    with pytest.raises(InputError, match="line 3"):
        ingest_csv(_csv(tmp_path, ["1", "2", "x"]))


def test_argparse_rejects_missing_subcommand_arguments():
    with pytest.raises(SystemExit) as exc:
        main(["refine", "--family", "student_t:r=1", "--n", "10"])
    assert exc.value.code == 2


def test_version_and_console_script():
    res = subprocess.run([sys.executable, "-m", "bisconcave.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "schema 1" in res.stdout
