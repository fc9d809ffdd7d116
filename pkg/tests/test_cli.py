import json
import os

import pytest

from cellsim.cli import main


def run_cli(*argv, env_seed=None):
    old = os.environ.pop("MNDT_SEED", None)
    try:
        if env_seed is not None:
            os.environ["MNDT_SEED"] = str(env_seed)
        return main(list(argv))
    finally:
        os.environ.pop("MNDT_SEED", None)
        if old is not None:
            os.environ["MNDT_SEED"] = old


def read_all(outdir):
    return {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}


def test_seed_required(tmp_path):
    assert run_cli("gen-scenario", "--preset", "desk", "--out", str(tmp_path)) == 2


def test_seed_env_fallback(tmp_path):
    code = run_cli("gen-scenario", "--preset", "desk", "--out", str(tmp_path),
                   env_seed=1)
    assert code == 0
    assert (tmp_path / "scenario.json").exists()


def test_gen_scenario_deterministic_bytes(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run_cli("gen-scenario", "--preset", "desk", "--seed", "3",
                       "--out", str(out)) == 0
    assert (a / "scenario.json").read_bytes() == (b / "scenario.json").read_bytes()


def test_gen_scenario_rejects_zero_lanes(tmp_path):
    assert run_cli("gen-scenario", "--preset", "desk", "--seed", "1",
                   "--lanes", "0", "--out", str(tmp_path)) == 2


def test_gen_scenario_table1_site_count(tmp_path):
    assert run_cli("gen-scenario", "--preset", "table1", "--seed", "1",
                   "--out", str(tmp_path)) == 0
    doc = json.loads((tmp_path / "scenario.json").read_text())
    assert len(doc["sites"]) == 184
    assert len(doc["lanes"]["edges"]) == 1850


def test_allocate_single_method_outputs(tmp_path):
    code = run_cli("allocate", "--preset", "desk", "--seed", "7",
                   "--method", "equal", "--users", "120", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["methods"]) == {"equal"}
    m = summary["methods"]["equal"]
    assert m["satisfaction_ratio"] >= 0.97
    assert m["throughput_x_bandwidth"] == pytest.approx(
        m["throughput_bits"] / summary["bandwidth_hz"], rel=1e-12)
    kpi = (tmp_path / "kpi.csv").read_text().splitlines()
    assert kpi[0] == ("t,sum_bs_rate,total_tx_power_w,throughput_bits,"
                      "outage_ratio,action_time_s,interaction_time_s")
    assert len(kpi) == 21  # header + 20 steps
    # timing columns stay zero unless profiling was requested
    assert all(line.split(",")[5] == "0.0" for line in kpi[1:])


def test_allocate_all_methods_summary(tmp_path):
    code = run_cli("allocate", "--preset", "desk", "--seed", "5",
                   "--method", "all", "--users", "80", "--tune-episodes", "1",
                   "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["methods"]) == {"ours", "equal", "ignore"}
    for method in ("ours", "equal", "ignore"):
        assert (tmp_path / f"kpi_{method}.csv").exists()


def test_sleep_outputs_and_rows(tmp_path):
    code = run_cli("sleep", "--preset", "desk", "--seed", "2",
                   "--grid-size", "125", "--out", str(tmp_path))
    assert code == 0
    week = (tmp_path / "week.csv").read_text().splitlines()
    assert week[0] == ("slot,traffic_total,energy_ours,energy_always_on,"
                       "energy_minimal_cells,switches_ours,switches_minimal")
    assert len(week) == 337  # header + 336 slots
    summary = json.loads((tmp_path / "sleep_summary.json").read_text())
    assert summary["energy_ours_wh"] < summary["energy_always_on_wh"]


def test_report_requires_inputs(tmp_path):
    assert run_cli("report", "--out", str(tmp_path / "empty")) == 5


def test_report_three_rows_and_series(tmp_path):
    assert run_cli("allocate", "--preset", "desk", "--seed", "5",
                   "--method", "all", "--users", "80", "--tune-episodes", "1",
                   "--out", str(tmp_path)) == 0
    assert run_cli("report", "--out", str(tmp_path)) == 0
    report = (tmp_path / "report.txt").read_text()
    for method in ("ours", "equal", "ignore"):
        assert method in report
        assert (tmp_path / f"series_throughput_{method}.csv").exists()
    assert "Throughput(xBandwidth)" in report


def test_report_deterministic(tmp_path):
    assert run_cli("allocate", "--preset", "desk", "--seed", "5",
                   "--method", "equal", "--users", "60", "--out", str(tmp_path)) == 0
    assert run_cli("report", "--out", str(tmp_path)) == 0
    first = (tmp_path / "report.txt").read_bytes()
    assert run_cli("report", "--out", str(tmp_path)) == 0
    assert (tmp_path / "report.txt").read_bytes() == first


def test_config_file_fills_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment knobs\nusers = 60\nseed = 9\n")
    out = tmp_path / "out"
    assert run_cli("allocate", "--preset", "desk", "--method", "equal",
                   "--config", str(cfg), "--out", str(out)) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_users"] == 60
    assert summary["seed"] == 9


def test_config_file_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("frobnicate = 1\n")
    assert run_cli("allocate", "--preset", "desk", "--seed", "1",
                   "--config", str(cfg), "--out", str(tmp_path)) == 2


def test_allocate_dump_files(tmp_path):
    code = run_cli("allocate", "--preset", "desk", "--seed", "3",
                   "--method", "equal", "--users", "30",
                   "--dump-trajectories", "--dump-links", "--dump-demand",
                   "--out", str(tmp_path))
    assert code == 0
    traj = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert traj[0] == "t,user_id,x,y,mode"
    assert len(traj) == 1 + 20 * 30
    links = (tmp_path / "links.csv").read_text().splitlines()
    assert links[0] == "t,user_id,site_id,los,L_d,L_s,L_f,PL_dB,rx_dbm"
    assert len(links) == 1 + 20 * 30 * 10
    # additive budget composition holds row by row
    for row in links[1:50]:
        parts = row.split(",")
        assert float(parts[7]) == pytest.approx(
            float(parts[4]) + float(parts[5]) + float(parts[6]), abs=1e-9)
    dem = (tmp_path / "demand.csv").read_text().splitlines()
    assert dem[0] == "t,user_id,demand_bits"
    assert len(dem) == 1 + 30  # uniform mode: one arrival row per user
