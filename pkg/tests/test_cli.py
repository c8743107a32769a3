import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from scaledmt import cli
from scaledmt.asymptotic import AsymptoticProblem, optimal_gamma
from scaledmt.core import MixtureModel, ScalingFunction, build_thresholds
from scaledmt.exact import rejection_count_pmf, sev_exact, sfdp_cdf, sfdp_moment
from scaledmt.optimality import figure1_data, peak_lambda
from scaledmt.procedures import step_up
from scaledmt.simulation import Scenario, run_grid


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_column(path, name, values):
    path.write_text(name + "\n" + "".join(f"{float(v)!r}\n" for v in values))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# reject ------------------------------------------------------------------------


def test_reject_example(tmp_path, capsys):
    src = write_column(tmp_path / "p.csv", "pvalue", [0.001, 0.02, 0.03, 0.2])
    out = tmp_path / "r.csv"
    code, stdout, _ = run(["reject", "--in", src, "--alpha", "0.05", "--gamma", "1", "--out", str(out)], capsys)
    assert code == 0
    summary = json.loads(stdout)
    assert summary["R"] == 3 and summary["m"] == 4
    assert summary["t_R"] == pytest.approx(0.0375)
    assert summary["config"]["alpha"] == 0.05
    rows = read_csv(out)
    assert [r["rejected"] for r in rows] == ["1", "1", "1", "0"]
    assert list(rows[0]) == ["index", "pvalue", "rejected"]


def test_reject_golden(tmp_path, capsys):
    p = np.random.default_rng(0).random(300) ** 3
    src = write_column(tmp_path / "p.csv", "pvalue", p)
    out = tmp_path / "r.csv"
    assert run(["reject", "--in", src, "--gamma", "0.4", "--out", str(out)], capsys)[0] == 0
    rows = read_csv(out)
    got = np.array([int(r["rejected"]) for r in rows])
    lib = step_up(p, build_thresholds(ScalingFunction.power(0.4), 300, 0.05))
    expect = np.zeros(300, dtype=int)
    expect[lib.rejected] = 1
    assert np.array_equal(got, expect)
    # 17 significant digits round-trip exactly
    assert np.array_equal(np.array([float(r["pvalue"]) for r in rows]), p)


def test_reject_with_scaling_file(tmp_path, capsys):
    src = write_column(tmp_path / "p.csv", "pvalue", [0.001, 0.02, 0.03, 0.2])
    sfile = write_column(tmp_path / "s.csv", "s", [1, 1, 1, 1])
    code, _, err = run(["reject", "--in", src, "--scaling-file", sfile], capsys)
    assert code == 0
    assert "\"R\": 1" in err  # summary goes to stderr when the table is on stdout


@pytest.mark.parametrize(
    "content, code",
    [("", 2), ("pvalue\n", 2), ("pvalue\n0.1\nabc\n", 2), ("other\n0.1\n", 2), ("pvalue\n0.1\n1.5\n", 2)],
)
def test_reject_bad_input(tmp_path, capsys, content, code):
    f = tmp_path / "bad.csv"
    f.write_text(content)
    got, _, err = run(["reject", "--in", str(f)], capsys)
    assert got == code
    assert err.startswith("error:")


def test_reject_malformed_rows_are_reported(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("pvalue\n0.1\nabc\n0.2\nxyz\n")
    _, _, err = run(["reject", "--in", str(f)], capsys)
    assert "3, 5" in err


def test_reject_parameter_errors(tmp_path, capsys):
    src = write_column(tmp_path / "p.csv", "pvalue", [0.01, 0.5])
    with pytest.raises(SystemExit) as exc:
        cli.main(["reject", "--in", src, "--gamma", "abc"])
    assert exc.value.code == 3
    assert run(["reject", "--in", src, "--gamma", "1.5"], capsys)[0] == 3
    assert run(["reject", "--in", src, "--alpha", "0"], capsys)[0] == 3
    assert run(["reject", "--in", str(tmp_path / "missing.csv")], capsys)[0] == 2


# exact -------------------------------------------------------------------------


def exact_json(argv, capsys):
    code, stdout, _ = run(["exact", "--format", "json"] + argv, capsys)
    assert code == 0
    return json.loads(stdout)


def test_exact_sev_example(capsys):
    res = exact_json(["--m", "10", "--pi0", "0.8", "--delta", "2", "--gamma", "0.5", "--sev"], capsys)
    assert res["value"] == pytest.approx(0.04, abs=1e-12)
    assert len(res["pmf"]) == 11


def test_exact_moment_one_equals_sev(capsys):
    base = ["--m", "12", "--m0", "9", "--delta", "2.5", "--gamma", "0.7"]
    sev = exact_json(base + ["--sev"], capsys)["value"]
    mom = exact_json(base + ["--moment", "1"], capsys)["value"]
    assert mom == pytest.approx(sev, abs=1e-15)


def test_exact_cdf_monotone(capsys):
    base = ["--m", "8", "--pi0", "0.6", "--delta", "2", "--gamma", "1"]
    hi = exact_json(base + ["--cdf", "0.9999"], capsys)["value"]
    lo = exact_json(base + ["--x", "0.5"], capsys)["value"]
    assert 0 <= lo <= hi <= 1


def test_exact_golden(capsys, tmp_path):
    model = MixtureModel(15, 0.8, delta=2.0)
    s = ScalingFunction.power(0.3)
    t = build_thresholds(s, 15, 0.1)
    base = ["--m", "15", "--pi0", "0.8", "--delta", "2", "--gamma", "0.3", "--alpha", "0.1"]
    assert exact_json(base + ["--sev"], capsys)["value"] == sev_exact(model, t, s)
    assert exact_json(base + ["--kappa", "2"], capsys)["value"] == sfdp_moment(model, t, s, 2)
    assert exact_json(base + ["--cdf", "0.3"], capsys)["value"] == sfdp_cdf(model, t, s, 0.3)
    out = tmp_path / "pmf.csv"
    assert run(["exact"] + base + ["--power", "--out", str(out)], capsys)[0] == 0
    pmf = [float(r["prob"]) for r in read_csv(out)]
    assert np.array_equal(pmf, rejection_count_pmf(model, t))


def test_exact_with_tabulated_alternative(tmp_path, capsys):
    u = np.linspace(0, 1, 201)
    f = tmp_path / "f1.csv"
    f.write_text("u,F1\n" + "".join(f"{float(a)!r},{math.sqrt(a)!r}\n" for a in u))
    res = exact_json(["--m", "6", "--pi0", "0.5", "--f1-file", str(f), "--sev"], capsys)
    assert res["value"] == pytest.approx(0.5 * 0.05 , abs=1e-12)


def test_exact_parameter_errors(capsys):
    assert run(["exact", "--m", "5", "--pi0", "1.5", "--delta", "1", "--sev"], capsys)[0] == 3
    assert run(["exact", "--m", "5", "--pi0", "0.5", "--sev"], capsys)[0] == 3
    assert run(["exact", "--m", "5", "--pi0", "0.5", "--delta", "1", "--cdf", "1.5"], capsys)[0] == 3
    assert run(["exact", "--m", "5", "--pi0", "1", "--delta", "1", "--power"], capsys)[0] == 3


# optimal-gamma ------------------------------------------------------------------


def test_optimal_gamma_known_parameters(capsys):
    code, stdout, _ = run(
        ["optimal-gamma", "--m", "1000", "--m1", "100", "--delta", "2", "--lambda", "1.05"], capsys
    )
    assert code == 0
    res = json.loads(stdout)
    assert res["mode"] == "known-parameters"
    assert res["gamma_star"] == pytest.approx(1.0, abs=0.02)
    assert all(abs(v) < 1e-8 for v in res["residuals"].values())
    lib = optimal_gamma(AsymptoticProblem.gaussian(1000, 900, 2.0, 0.05, 1.05))
    assert res["gamma_star"] == lib.gamma and res["u_star"] == lib.u
    assert res["config"]["method"] == "loss"


def test_optimal_gamma_estimate_all_null(tmp_path, capsys):
    src = write_column(tmp_path / "z.csv", "z", np.random.default_rng(3).standard_normal(1500))
    code, stdout, _ = run(["optimal-gamma", "--estimate", "--in", src, "--lambda", "4"], capsys)
    assert code == 0
    res = json.loads(stdout)
    assert res["mode"] == "em-estimated"
    assert res["fallback"] is True and res["gamma_star"] == 0.5
    assert res["em_degenerate"] is True


def test_optimal_gamma_grid(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, stdout, _ = run(
        ["optimal-gamma", "--m", "1000", "--m1", "100", "--delta", "4", "--grid",
         "--lambdas", "1,4,16", "--out", str(out)],
        capsys,
    )
    assert code == 0
    curve = json.loads(stdout)["curve"]
    assert [c["lambda"] for c in curve] == [1.0, 4.0, 16.0]
    g = [float(r["gamma_star"]) for r in read_csv(out)]
    assert g == [c["gamma_star"] for c in curve]
    assert g[0] >= g[1] >= g[2]


def test_optimal_gamma_infeasible_exit_code(capsys):
    code, _, err = run(["optimal-gamma", "--m", "1000", "--m1", "100", "--delta", "0", "--lambda", "2"], capsys)
    assert code == 4
    assert "infeasible" in err


def test_optimal_gamma_parameter_errors(capsys):
    assert run(["optimal-gamma", "--m", "1000", "--m1", "100", "--delta", "2", "--lambda", "0.5"], capsys)[0] == 3
    assert run(["optimal-gamma", "--m", "1000", "--delta", "2"], capsys)[0] == 3
    assert run(["optimal-gamma", "--estimate"], capsys)[0] == 3


# simulate ----------------------------------------------------------------------


SIM = ["simulate", "--m", "100", "--m1", "10", "--delta", "3", "--reps", "300", "--seed", "5",
       "--gamma-step", "0.25", "--lambdas", "1,10,100"]


def test_simulate_golden(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, stdout, _ = run(SIM + ["--out", str(out), "--threads", "2"], capsys)
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == cli.SIM_HEADER
    sc = Scenario(m=100, m1=10, delta=3.0, gammas=(0, 0.25, 0.5, 0.75, 1.0), lambdas=(1, 10, 100),
                  replications=300, seed=5)
    res = run_grid(sc, threads=1)
    loss = np.array([float(r["mean_loss"]) for r in rows]).reshape(5, 3)
    assert np.array_equal(loss, res.mean_loss)
    summary = json.loads(stdout)
    assert summary["config"]["seed"] == 5 and summary["config"]["reps"] == 300
    assert list(summary["argmin_gamma"].values()) == res.argmin_gamma.tolist()


def test_simulate_same_seed_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(SIM + ["--out", str(a), "--threads", "1"], capsys)
    run(SIM + ["--out", str(b), "--threads", "4"], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_global_null_controls_sev(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ["simulate", "--m", "200", "--m1", "0", "--delta", "0", "--reps", "2000",
            "--gamma-step", "0.5", "--lambdas", "1", "--out", str(out)]
    assert run(argv, capsys)[0] == 0
    for r in read_csv(out):
        se = math.sqrt(float(r["sev_hat"]) * (1 - float(r["sev_hat"])) / 2000)
        assert float(r["sev_hat"]) <= 0.05 + 3 * max(se, 0.05 / math.sqrt(2000))


@pytest.mark.slow
def test_simulate_few_alternatives_large_lambda(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ["simulate", "--m", "1000", "--m1", "10", "--delta", "4", "--reps", "10000", "--seed", "1",
            "--out", str(out)]
    code, stdout, _ = run(argv, capsys)
    assert code == 0
    argmins = json.loads(stdout)["argmin_gamma"]
    largest = max(argmins, key=float)
    assert argmins[largest] <= 0.6


def test_simulate_parameter_errors(capsys):
    assert run(["simulate", "--m", "100", "--delta", "3"], capsys)[0] == 3
    assert run(["simulate", "--m", "100", "--m1", "100", "--delta", "3"], capsys)[0] == 3
    assert run(["simulate", "--m", "100", "--m1", "1", "--delta", "3", "--gamma-step", "0"], capsys)[0] == 3


# model-case --------------------------------------------------------------------


@pytest.mark.parametrize("alpha, peak, tol", [("0.05", 3.868132, 1e-5), ("0.01", 14.96849, 1e-4)])
def test_model_case_peak_metadata(capsys, tmp_path, alpha, peak, tol):
    out = tmp_path / "f.csv"
    code, stdout, _ = run(["model-case", "--alpha", alpha, "--out", str(out)], capsys)
    assert code == 0
    meta = json.loads(stdout)["peak_lambda"]
    assert meta[alpha] == pytest.approx(peak, abs=tol)
    assert len(read_csv(out)) == 491


def test_model_case_lambda_one_at_twice_critical_value(capsys):
    z = stats.norm.isf(0.05)
    argv = ["model-case", "--alpha", "0.05", "--delta-min", repr(float(2 * z)), "--delta-max", repr(float(2 * z))]
    code, stdout, _ = run(argv, capsys)
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert code == 0 and len(rows) == 1
    assert float(rows[0]["lambda"]) == pytest.approx(1.0, abs=1e-10)


def test_model_case_golden(capsys, tmp_path):
    out = tmp_path / "f.csv"
    run(["model-case", "--alpha", "0.01,0.05", "--out", str(out)], capsys)
    rows = read_csv(out)
    deltas = np.round(0.1 + 0.01 * np.arange(491), 12)
    tab = figure1_data([0.01, 0.05], deltas)
    assert np.array_equal([float(r["lambda"]) for r in rows], tab["lam"])
    assert list(rows[0]) == ["alpha", "delta", "lambda"]


def test_model_case_cv_table(capsys):
    code, stdout, _ = run(["model-case", "--lambda", "1", "--delta-min", "3", "--delta-max", "3"], capsys)
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert code == 0 and float(rows[0]["cv_opt"]) == 1.5


def test_model_case_parameter_errors(capsys):
    assert run(["model-case", "--alpha", "1.5"], capsys)[0] == 3
    assert run(["model-case", "--delta-min", "2", "--delta-max", "1"], capsys)[0] == 3
    assert peak_lambda(0.05) > 1


def test_console_script_entry_point(tmp_path):
    src = write_column(tmp_path / "p.csv", "pvalue", [0.001, 0.02, 0.03, 0.2])
    env = dict(os.environ, SCALEDMT_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "scaledmt.cli", "reject", "--in", src, "--out", str(tmp_path / "o.csv")],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["R"] == 3
