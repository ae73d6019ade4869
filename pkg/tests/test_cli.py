import json
import os
import struct

from pinflip.cli import main


def run(tmp_path, *argv):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


def test_phase_csv_contract(tmp_path):
    rc = run(
        tmp_path, "phase", "--lambda", "0.5:6:0.5", "--sigma", "0:2:0.5",
        "--out", "grid.csv",
    )
    assert rc == 0
    lines = (tmp_path / "grid.csv").read_text().splitlines()
    assert lines[0] == (
        "lambda,sigma,F,G,Gprime,E,beta_star,sigma0,static_regime,dynamic_regime"
    )
    assert len(lines) == 1 + 12 * 5


def test_gap_json_n2(tmp_path):
    rc = run(
        tmp_path, "gap", "--N", "2", "--lambda", "3", "--sigma", "1",
        "--format", "json", "--out", "gap.json",
    )
    assert rc == 0
    doc = json.loads((tmp_path / "gap.json").read_text())
    assert doc["schema"] == "pinflip/1"
    assert doc["gap"] == 1.0
    assert doc["checks"]["sandwich"] is True
    assert doc["checks"]["star_leq"] is True


def test_gap_sweep_csv(tmp_path):
    rc = run(
        tmp_path, "gap", "--N", "2:6:2", "--lambda", "4", "--sigma", "1",
        "--out", "sweep.csv",
    )
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "N,lambda,sigma,gap,t_rel"
    assert len(lines) == 4
    assert lines[1].startswith("2,4,1,1,")  # gap = 1 at N = 2


def test_exact_renewal_check(tmp_path):
    rc = run(
        tmp_path, "exact", "--N", "10", "--lambda", "4", "--sigma", "1",
        "--renewal-check", "--out", "exact.json",
    )
    assert rc == 0
    doc = json.loads((tmp_path / "exact.json").read_text())
    assert doc["renewal_defect"] < 1e-10
    assert "logZ" in doc and "logZ_boundary" in doc


def test_determinism_byte_identical(tmp_path):
    args = [
        "metastable", "--N", "8", "--lambda", "20", "--sigma", "2.4",
        "--seed", "5", "--replicas", "40", "--out", "exit.csv",
        "--summary", "exit.json",
    ]
    assert run(tmp_path, *args) == 0
    first_csv = (tmp_path / "exit.csv").read_bytes()
    first_json = (tmp_path / "exit.json").read_bytes()
    assert run(tmp_path, *args) == 0
    assert (tmp_path / "exit.csv").read_bytes() == first_csv
    assert (tmp_path / "exit.json").read_bytes() == first_json


def test_jobs_do_not_change_output(tmp_path):
    base = [
        "metastable", "--N", "8", "--lambda", "20", "--sigma", "2.4",
        "--seed", "5", "--replicas", "24", "--out", "exit.csv",
    ]
    assert run(tmp_path, *base) == 0
    serial = (tmp_path / "exit.csv").read_bytes()
    assert run(tmp_path, *base, "--jobs", "3") == 0
    assert (tmp_path / "exit.csv").read_bytes() == serial


def test_validation_exit_codes(tmp_path):
    # missing seed on a stochastic command
    rc = run(tmp_path, "sample", "--N", "4", "--lambda", "1", "--sigma", "0",
             "--out", "s.txt")
    assert rc == 2
    # no metastable well
    rc = run(tmp_path, "metastable", "--N", "8", "--lambda", "1",
             "--sigma", "0.5", "--seed", "1", "--out", "e.csv")
    assert rc == 2
    # capacity: names the cap
    rc = run(tmp_path, "exact", "--N", "99999999", "--lambda", "4",
             "--sigma", "1", "--out", "x.json")
    assert rc == 3
    # budget refusal reports the prediction
    rc = run(tmp_path, "metastable", "--N", "60", "--lambda", "20",
             "--sigma", "2.6", "--seed", "1", "--replicas", "500",
             "--budget", "10", "--out", "e.csv")
    assert rc == 2


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("PINFLIP_SEED", "77")
    rc = run(tmp_path, "sample", "--N", "4", "--lambda", "1", "--sigma", "0",
             "--replicas", "5", "--out", "s.txt")
    assert rc == 0
    lines = (tmp_path / "s.txt").read_text().splitlines()
    assert len(lines) == 5
    for line in lines:
        vals = [int(v) for v in line.split()]
        assert len(vals) == 9 and vals[0] == vals[-1] == 0


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("N=2\nlambda=3\nsigma=1\n")
    rc = run(tmp_path, "gap", "--config", str(cfg), "--out", "gap.json")
    assert rc == 0
    doc = json.loads((tmp_path / "gap.json").read_text())
    assert doc["N"] == 2 and doc["gap"] == 1.0


def test_figures_written(tmp_path):
    rc = run(
        tmp_path, "phase", "--lambda", "2.5:5:0.5", "--sigma", "0:1.5:0.5",
        "--out", "grid.csv", "--figures",
    )
    assert rc == 0
    assert (tmp_path / "grid.png").exists()
    rc = run(
        tmp_path, "sample", "--N", "30", "--lambda", "1", "--sigma", "2",
        "--seed", "3", "--replicas", "10", "--out", "s.txt", "--figures",
    )
    assert rc == 0
    assert (tmp_path / "s.png").exists()


def test_simulate_outputs(tmp_path):
    rc = run(
        tmp_path, "simulate", "--N", "6", "--lambda", "6", "--sigma", "3",
        "--seed", "2", "--horizon", "20", "--cadence", "2",
        "--initial", "maximal", "--out", "traj.csv", "--events", "traj.bin",
    )
    assert rc == 0
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0] == "t,H,A,l_max,L,R,in_HN"
    assert len(lines) == 12  # t = 0..20 step 2
    blob = (tmp_path / "traj.bin").read_bytes()
    assert len(blob) % 16 == 0
    t0, site, height = struct.unpack("<dII", blob[:16])
    assert 0 < t0 < 20 and 1 <= site <= 11


def test_simulate_coalescence(tmp_path):
    rc = run(
        tmp_path, "simulate", "--N", "4", "--lambda", "1", "--sigma", "0",
        "--seed", "2", "--coalescence", "--replicas", "30", "--out", "coal.json",
    )
    assert rc == 0
    doc = json.loads((tmp_path / "coal.json").read_text())
    assert doc["command"] == "simulate.coalescence"
    assert doc["mean"] > 0


def test_exact_laws_and_marginals(tmp_path):
    rc = run(
        tmp_path, "exact", "--N", "8", "--lambda", "4", "--sigma", "1",
        "--lmax-law", "lmax.csv", "--profile", "prof.csv",
        "--site", "8", "--site-out", "site.csv", "--out", "exact.json",
        "--figures",
    )
    assert rc == 0
    law = (tmp_path / "lmax.csv").read_text().splitlines()
    assert law[0] == "l_max,probability" and len(law) == 9
    total = sum(float(line.split(",")[1]) for line in law[1:])
    assert abs(total - 1.0) < 1e-10
    prof = (tmp_path / "prof.csv").read_text().splitlines()
    assert prof[0] == "site,mean_height" and len(prof) == 18
    assert (tmp_path / "lmax.png").exists()
    assert (tmp_path / "prof.png").exists()
