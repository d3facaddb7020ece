import subprocess
import sys

import pytest

from ppalloc.arrival import InitialSequence, write_instance
from ppalloc.cli import main
from ppalloc.experiments import PolicySpec, estimate_ratio, table2_instance
from ppalloc.policies import MarketParams


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


SIM = ["simulate", "--policy", "alg1", "--a", "0.5", "--p", "0.5", "--b", "40", "--n", "400",
       "--instance", "table2", "--trials", "2000", "--seed", "7"]


def test_simulate_matches_library(capsys):
    code, out, _ = run(capsys, *SIM)
    assert code == 0
    assert out.startswith("# config: {")
    row = csv_rows(out)[0]
    est = estimate_ratio(PolicySpec("alg1"), table2_instance(40, 400), MarketParams(40, 400, 0.5, 0.5), 2000, 7)
    assert float(row["mean_ratio"]) == pytest.approx(est.mean_ratio, rel=1e-5)
    assert float(row["ci_half_width"]) == pytest.approx(est.ci_half_width_95, rel=1e-5)


def test_simulate_trace(capsys):
    code, out, _ = run(capsys, "simulate", "--trace", "--policy", "alg2", "--c", "0.9", "--a", "0.5", "--p", "0.5",
                       "--b", "5", "--n", "12", "--seed", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "step,lambda,arrival_kind,decision,q1,q2e,q2f,q2,inventory_left"
    assert len(lines) == 2 + 12


def test_missing_p_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate", "--policy", "alg1", "--a", "0.5", "--b", "4", "--n", "10")
    assert code == 2
    assert "--p" in err


def test_unknown_policy_is_usage_error(capsys):
    assert run(capsys, "simulate", "--policy", "greedy")[0] == 2


def test_degenerate_instance_exit_one(capsys, tmp_path):
    path = tmp_path / "empty.txt"
    write_instance(InitialSequence([0] * 10, 0.5), path)
    code, _, err = run(capsys, "simulate", "--policy", "ball", "--a", "0.5", "--p", "0.5", "--b", "3", "--n", "10",
                       "--instance", str(path), "--trials", "1000")
    assert code == 1
    assert "zero" in err


def test_bad_domain_exit_one(capsys):
    assert run(capsys, "simulate", "--policy", "ball", "--a", "1.5", "--p", "0.5", "--b", "3", "--n", "10")[0] == 1
    assert run(capsys, "simulate", "--policy", "alg2", "--c", "1.0", "--a", "0.5", "--p", "0.5", "--b", "3",
               "--n", "10", "--trials", "1000")[0] == 1


def test_secretary_optimal(capsys):
    code, out, _ = run(capsys, "secretary", "--p", "0.5", "--optimal")
    row = csv_rows(out)[0]
    assert code == 0
    assert float(row["gamma"]) == pytest.approx(0.4597, abs=1e-3)
    assert float(row["formula_value"]) == pytest.approx(0.0724, abs=1e-3)


def test_secretary_monte_carlo(capsys):
    code, out, _ = run(capsys, "secretary", "--p", "1", "--gamma", "0.3679", "--n", "200", "--trials", "2000",
                       "--kind", "uniform-adversary", "--seed", "3")
    row = csv_rows(out)[0]
    assert code == 0 and row["mc_estimate"] and row["ci_half_width"]


def test_secretary_needs_one_gamma_source(capsys):
    assert run(capsys, "secretary", "--p", "0.5")[0] == 2
    assert run(capsys, "secretary", "--p", "0.5", "--gamma", "0.3", "--optimal")[0] == 2


def test_mp1_full_inventory(capsys):
    code, out, _ = run(capsys, "mp1", "--a", "0.5", "--p", "0.5", "--kappa", "1.0")
    row = csv_rows(out)[0]
    assert code == 0
    assert list(row) == ["a", "p", "kappa", "c_star", "lambda", "n1", "n2", "eta1", "eta2"]
    assert float(row["c_star"]) == pytest.approx(1.0, abs=1e-4)


def test_reproduce_fig2_subset(capsys):
    code, out, _ = run(capsys, "reproduce", "fig2", "--a", "0.5", "--kappa", "0.5,0.9", "--p", "0.5")
    rows = csv_rows(out)
    assert code == 0
    assert float(rows[0]["c_star"]) == pytest.approx(0.85166, abs=0.005)
    assert float(rows[1]["c_star"]) == pytest.approx(0.98226, abs=0.005)


def test_reproduce_table3(capsys):
    code, out, _ = run(capsys, "reproduce", "table3")
    rows = csv_rows(out)
    assert code == 0 and len(rows) == 10
    assert float(rows[2]["gamma_star"]) == pytest.approx(0.4784, abs=1e-3)
    code, plot, _ = run(capsys, "reproduce", "table3", "--plot-data")
    assert plot.splitlines()[0] == "0.1 0.493475"


def test_reproduce_needs_p(capsys):
    assert run(capsys, "reproduce", "table2", "--a", "0.5")[0] == 2


def test_reproduce_table2_small(capsys):
    code, out, _ = run(capsys, "reproduce", "table2", "--p", "0.5", "--b", "100", "--n", "200", "--trials", "1000",
                       "--c", "0.9")
    rows = {r["policy"]: r for r in csv_rows(out)}
    assert code == 0
    assert set(rows) == {"ball", "uniform", "mixture", "alg1", "alg2"}
    assert float(rows["alg2"]["mean_ratio"]) == 1


def test_config_file_merges_with_flags_winning(capsys, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# sweep defaults\npolicy = ball\na = 0.5\np = 0.5\nb = 40\nn = 400\ntrials = 1000\nseed = 2\n")
    code, out, _ = run(capsys, "simulate", "--config", str(conf), "--p", "0.3")
    assert code == 0
    row = csv_rows(out)[0]
    assert row["policy"] == "ball" and float(row["p"]) == 0.3 and row["trials"] == "1000"


def test_config_file_unknown_key(capsys, tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("colour = blue\n")
    assert run(capsys, "simulate", "--config", str(conf))[0] == 2


def test_out_file_and_thread_invariance(capsys, tmp_path):
    out1, out4 = tmp_path / "t1.csv", tmp_path / "t4.csv"
    args = ["simulate", "--policy", "mixture", "--a", "0.5", "--p", "0.5", "--b", "40", "--n", "300",
            "--trials", "6000", "--seed", "11"]
    assert main(args + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(args + ["--threads", "4", "--out", str(out4)]) == 0
    assert out1.read_bytes() == out4.read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ppalloc", "secretary", "--p", "1", "--optimal"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.367879" in proc.stdout
