"""Command line entry points.

Subcommands: gen-scenario, allocate, sleep, report. Every command requires
a seed (flag or MNDT_SEED env var) and is byte-deterministic given its
flags: reruns produce identical files. Exit codes: 0 success, 2 invalid
flags, 3 write failure, 4 optimizer emitted an invalid allocation, 5
missing inputs.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import sleep as sleep_mod
from .alloc import DemandController, make_policy
from .engine import CmdpEnv, EpisodeConfig, run_episode, satisfaction_ratio
from .radio import ConstraintViolation, KpiRecord
from .scenario import (GenerationSpec, PRESETS, ScenarioError, build_grid,
                       generate_scenario, load_scenario, save_scenario)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_WRITE = 3
EXIT_CONSTRAINT = 4
EXIT_MISSING = 5

METHODS = ("ours", "equal", "ignore")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _read_config_file(path):
    """Flat KEY=VALUE file with # comments; returns a string dict."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read config file {path}: {exc}")
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_USAGE, f"bad config line (need KEY=VALUE): {line!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MNDT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(EXIT_USAGE, f"MNDT_SEED is not an integer: {env!r}")
    raise CliError(EXIT_USAGE, "a seed is required (--seed or MNDT_SEED)")


def _out_dir(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot create output directory {out}: {exc}")
    return out


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot write {path}: {exc}")


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _generation_spec(args):
    spec = PRESETS[args.preset]()
    overrides = {}
    if getattr(args, "lanes", None) is not None:
        overrides["n_lanes"] = args.lanes
    if getattr(args, "aois", None) is not None:
        overrides["n_aois"] = args.aois
    if getattr(args, "sites_indoor", None) is not None:
        overrides["n_sites_indoor"] = args.sites_indoor
    if getattr(args, "sites_outdoor", None) is not None:
        overrides["n_sites_outdoor"] = args.sites_outdoor
    if getattr(args, "channels", None) is not None:
        overrides["n_channels"] = args.channels
    if getattr(args, "extent", None) is not None:
        overrides["extent_m"] = tuple(args.extent)
    for key, val in overrides.items():
        setattr(spec, key, val)
    if spec.n_lanes < 1 or spec.n_aois < 1 or (spec.n_sites_indoor + spec.n_sites_outdoor) < 1:
        raise CliError(EXIT_USAGE, "lane, AoI and site counts must be positive")
    return spec


def _scenario_for(args, seed):
    if getattr(args, "scenario", None):
        path = Path(args.scenario)
        if not path.exists():
            raise CliError(EXIT_USAGE, f"scenario file not found: {path}")
        return load_scenario(path)
    return generate_scenario(seed, _generation_spec(args))


def _episode_config(args, seed):
    if args.preset == "desk" and not args.scenario:
        cfg = EpisodeConfig.desk()
    else:
        cfg = EpisodeConfig()
    if args.users is not None:
        cfg.n_users = args.users
    if args.horizon is not None:
        cfg.horizon_steps = args.horizon
    if args.nlos_db is not None:
        cfg.nlos_penalty_db = args.nlos_db
    return cfg


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_scenario(args):
    seed = _resolve_seed(args)
    out = _out_dir(args)
    scen = generate_scenario(seed, _generation_spec(args))
    path = out / "scenario.json"
    try:
        save_scenario(scen, path)
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot write {path}: {exc}")
    print(f"wrote {path}")
    print(f"lanes={len(scen.lanes.edges)} aois={len(scen.aois)} "
          f"buildings={len(scen.buildings)} sites={len(scen.sites)} "
          f"(indoor={sum(s.indoor for s in scen.sites)}, "
          f"outdoor={sum(not s.indoor for s in scen.sites)})")
    return EXIT_OK


def _kpi_csv(trace, profile=False):
    lines = [KpiRecord.CSV_HEADER]
    lines.extend(step.kpi.csv_row(profile=profile) for step in trace.steps)
    return "\n".join(lines) + "\n"


def run_allocation_experiment(scen, cfg, seed, methods, lam=10.0, tune_episodes=2,
                              eta=2.0, kappa_bounds=(0.5, 3.0), power_rounds=3):
    """One evaluation episode per method; the adaptive method first tunes
    its quota controller on side episodes. Returns {method: trace}."""
    traces = {}
    for method in methods:
        if method == "ours":
            controller = DemandController(eta=eta, bounds=kappa_bounds)
            for i in range(tune_episodes):
                env = CmdpEnv(scen, cfg, seed=seed * 1000 + i)
                run_episode(env, make_policy("ours", env, lam=lam, controller=controller,
                                             power_rounds=power_rounds))
            env = CmdpEnv(scen, cfg, seed=seed)
            policy = make_policy("ours", env, lam=lam, controller=controller,
                                 power_rounds=power_rounds)
        elif method == "equal":
            env = CmdpEnv(scen, cfg, seed=seed)
            policy = make_policy(method, env, lam=lam, power_rounds=power_rounds)
        else:
            env = CmdpEnv(scen, cfg, seed=seed)
            policy = make_policy(method, env)
        traces[method] = run_episode(env, policy)
    return traces


def _dump_trajectories(env, out):
    env.reset()
    rows = ["t,user_id,x,y,mode"]
    mode = env.config.mobility_mode
    for t in range(env.config.horizon_steps):
        pos = env._positions_at(t)
        rows.extend(f"{t},{u},{float(pos[u, 0])!r},{float(pos[u, 1])!r},{mode}"
                    for u in range(env.config.n_users))
    _write_text(out / "trajectories.csv", "\n".join(rows) + "\n")


def _dump_links(scen, cfg, seed, out):
    from dataclasses import replace as dc_replace
    from .channel import AntennaPattern
    env_cfg = dc_replace(cfg, keep_link_terms=True)
    env = CmdpEnv(scen, env_cfg, seed=seed)
    env.reset()
    patterns = [AntennaPattern(5.0 if s.indoor else 15.0) for s in scen.sites]
    rows = ["t,user_id,site_id,los,L_d,L_s,L_f,PL_dB,rx_dbm"]
    for t in range(env_cfg.horizon_steps):
        terms = env.last_link_terms
        pos = env.state.user_positions
        for b, site in enumerate(scen.sites):
            bearing = np.degrees(np.arctan2(pos[:, 1] - site.position[1],
                                            pos[:, 0] - site.position[0]))
            gain = patterns[b].gain_db(bearing - site.azimuth_deg)
            rx = site.max_tx_power_dbm + gain - terms["PL"][:, b]
            rows.extend(
                f"{t},{u},{site.id},{int(terms['los'][u, b])},"
                f"{float(terms['L_d'][u, b])!r},{float(terms['L_s'][u, b])!r},"
                f"{float(terms['L_f'][u, b])!r},{float(terms['PL'][u, b])!r},"
                f"{float(rx[u])!r}" for u in range(env_cfg.n_users))
        env.step(radio_empty())
    _write_text(out / "links.csv", "\n".join(rows) + "\n")


def radio_empty():
    from .radio import Allocation
    return Allocation.empty()


def _dump_demand(env, out):
    trace = env.demand_trace()
    rows = ["t,user_id,demand_bits"]
    for t in range(trace.shape[0]):
        rows.extend(f"{t},{u},{float(trace[t, u])!r}" for u in range(trace.shape[1]))
    _write_text(out / "demand.csv", "\n".join(rows) + "\n")


ALLOCATE_DEFAULTS = {"lam": 10.0, "tune_episodes": 2, "eta": 2.0,
                     "kappa_min": 0.5, "kappa_max": 3.0, "power_rounds": 3}


def cmd_allocate(args):
    seed = _resolve_seed(args)
    out = _out_dir(args)
    for key, fallback in ALLOCATE_DEFAULTS.items():
        if getattr(args, key) is None:
            setattr(args, key, fallback)
    scen = _scenario_for(args, seed)
    cfg = _episode_config(args, seed)
    methods = METHODS if args.method == "all" else (args.method,)
    try:
        traces = run_allocation_experiment(
            scen, cfg, seed, methods, lam=args.lam, tune_episodes=args.tune_episodes,
            eta=args.eta, kappa_bounds=(args.kappa_min, args.kappa_max),
            power_rounds=args.power_rounds)
    except ConstraintViolation as exc:
        print(f"allocation aborted: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    if args.dump_trajectories or args.dump_demand:
        env = CmdpEnv(scen, cfg, seed=seed)
        if args.dump_trajectories:
            _dump_trajectories(env, out)
        if args.dump_demand:
            _dump_demand(env, out)
    if args.dump_links:
        _dump_links(scen, cfg, seed, out)
    bandwidth = cfg.radio.rb_bandwidth_hz
    summary = {"seed": seed, "preset": args.preset, "n_users": cfg.n_users,
               "horizon_steps": cfg.horizon_steps, "bandwidth_hz": bandwidth,
               "methods": {}}
    for method, trace in traces.items():
        per_user = trace.per_user_served()
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(trace.initial_demand > 0,
                              per_user / np.maximum(trace.initial_demand, 1e-12), 1.0)
        summary["methods"][method] = {
            "throughput_x_bandwidth": trace.total_reward_bits / bandwidth,
            "throughput_bits": trace.total_reward_bits,
            "served_bits": trace.total_cost_bits,
            "satisfaction_ratio": satisfaction_ratio(trace),
            "mean_user_satisfaction": float(np.minimum(ratios, 1.0).mean()),
        }
        _write_text(out / f"kpi_{method}.csv", _kpi_csv(trace, profile=args.profile))
    primary = methods[0]
    _write_text(out / "kpi.csv", _kpi_csv(traces[primary], profile=args.profile))
    _write_json(out / "summary.json", summary)
    for method in methods:
        m = summary["methods"][method]
        print(f"{method}: throughput={m['throughput_x_bandwidth']:.4g}xB "
              f"satisfaction={m['satisfaction_ratio']:.4f}")
    print(f"wrote {out / 'kpi.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def cmd_sleep(args):
    seed = _resolve_seed(args)
    out = _out_dir(args)
    scen = _scenario_for(args, seed)
    grid = build_grid(scen, args.grid_size)
    fleet = sleep_mod.build_cell_fleet(scen, grid, cells_per_site=args.cells_per_site,
                                       cell_capacity_bps=args.cell_capacity_mbps * 1e6)
    model = sleep_mod.EnergyModel()
    result = sleep_mod.run_week(seed, fleet, model=model, h=args.hysteresis)
    lines = [sleep_mod.WeekResult.CSV_HEADER]
    lines.extend(result.csv_rows())
    _write_text(out / "week.csv", "\n".join(lines) + "\n")
    totals = result.totals()
    totals["energy_saving_vs_always_on"] = 1.0 - (
        totals["energy_ours_wh"] / totals["energy_always_on_wh"])
    summary = {"seed": seed, "n_cells": fleet.n_cells, "n_grids": fleet.n_grids,
               "slots": len(result.records), **totals}
    _write_json(out / "sleep_summary.json", summary)
    print(f"h={result.h} energy_ours/always_on="
          f"{totals['energy_ours_wh'] / totals['energy_always_on_wh']:.3f} "
          f"switches ours={totals['switches_ours']} minimal={totals['switches_minimal']}")
    print(f"wrote {out / 'week.csv'} and {out / 'sleep_summary.json'}")
    return EXIT_OK


def cmd_report(args):
    out = _out_dir(args)
    summary_path = out / "summary.json"
    week_path = out / "week.csv"
    if not summary_path.exists() and not week_path.exists():
        print(f"no run outputs found under {out}", file=sys.stderr)
        return EXIT_MISSING
    lines = []
    if summary_path.exists():
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        lines.append("Resource allocation comparison")
        lines.append(f"{'Method':<18}{'Throughput(xBandwidth)':>24}{'Satisfaction Ratio':>20}")
        for method in METHODS:
            if method not in summary.get("methods", {}):
                continue
            m = summary["methods"][method]
            lines.append(f"{method:<18}{m['throughput_x_bandwidth']:>24.4g}"
                         f"{m['satisfaction_ratio']:>20.4f}")
        for method, m in summary.get("methods", {}).items():
            kpi_path = out / f"kpi_{method}.csv"
            if kpi_path.exists():
                rows = kpi_path.read_text(encoding="utf-8").strip().splitlines()[1:]
                xs = [r.split(",")[0] for r in rows]
                ys = [r.split(",")[3] for r in rows]
                _write_text(out / f"series_throughput_{method}.csv",
                            "x,y\n" + "\n".join(f"{x},{y}" for x, y in zip(xs, ys)) + "\n")
    if week_path.exists():
        rows = week_path.read_text(encoding="utf-8").strip().splitlines()
        header = rows[0].split(",")
        cols = {name: i for i, name in enumerate(header)}
        data = [r.split(",") for r in rows[1:]]
        for series in ("traffic_total", "energy_ours", "energy_always_on", "energy_minimal_cells"):
            _write_text(out / f"series_{series}.csv",
                        "x,y\n" + "\n".join(f"{r[cols['slot']]},{r[cols[series]]}" for r in data) + "\n")
        e_ours = sum(float(r[cols["energy_ours"]]) for r in data)
        e_on = sum(float(r[cols["energy_always_on"]]) for r in data)
        e_min = sum(float(r[cols["energy_minimal_cells"]]) for r in data)
        lines.append("")
        lines.append("Weekly sleep experiment")
        lines.append(f"{'Strategy':<18}{'Energy (Wh)':>16}{'vs always-on':>14}")
        lines.append(f"{'always-on':<18}{e_on:>16.0f}{1.0:>14.3f}")
        lines.append(f"{'minimal-cells':<18}{e_min:>16.0f}{e_min / e_on:>14.3f}")
        lines.append(f"{'ours':<18}{e_ours:>16.0f}{e_ours / e_on:>14.3f}")
    report = "\n".join(lines) + "\n"
    _write_text(out / "report.txt", report)
    print(report, end="")
    print(f"wrote {out / 'report.txt'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring

def _add_common(p, with_scenario=True):
    p.add_argument("--seed", type=int, default=None,
                   help="run seed (falls back to MNDT_SEED)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", default=None, help="flat KEY=VALUE config file")
    if with_scenario:
        p.add_argument("--scenario", default=None, help="scenario JSON path")
        p.add_argument("--preset", choices=sorted(PRESETS), default="desk")


def _add_gen_args(p):
    p.add_argument("--lanes", type=int, default=None)
    p.add_argument("--aois", type=int, default=None)
    p.add_argument("--sites-indoor", type=int, default=None)
    p.add_argument("--sites-outdoor", type=int, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--extent", type=float, nargs=2, default=None,
                   metavar=("WIDTH", "HEIGHT"))


def build_parser():
    ap = argparse.ArgumentParser(prog="cellsim",
                                 description="cellular network simulator and optimizers")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenario", help="synthesize and save a scenario")
    _add_common(g, with_scenario=False)
    g.add_argument("--preset", choices=sorted(PRESETS), default="table1")
    _add_gen_args(g)
    g.set_defaults(fn=cmd_gen_scenario)

    a = sub.add_parser("allocate", help="run the resource allocation experiment")
    _add_common(a)
    _add_gen_args(a)
    a.add_argument("--method", choices=METHODS + ("all",), default="all")
    a.add_argument("--users", type=int, default=None)
    a.add_argument("--horizon", type=int, default=None)
    a.add_argument("--lam", type=float, default=None,
                   help="edge-score weight on predicted quota shortfall (default 10)")
    a.add_argument("--tune-episodes", type=int, default=None,
                   help="controller tuning episodes before the measured one (default 2)")
    a.add_argument("--eta", type=float, default=None,
                   help="quota controller feedback gain (default 2)")
    a.add_argument("--kappa-min", type=float, default=None)
    a.add_argument("--kappa-max", type=float, default=None)
    a.add_argument("--power-rounds", type=int, default=None,
                   help="interference fixed-point rounds in power allocation (default 3)")
    a.add_argument("--nlos-db", type=float, default=None)
    a.add_argument("--profile", action="store_true",
                   help="record wall-clock timings in kpi.csv (non-deterministic)")
    a.add_argument("--dump-trajectories", action="store_true",
                   help="also write trajectories.csv (t,user_id,x,y,mode)")
    a.add_argument("--dump-links", action="store_true",
                   help="also write links.csv with per-step link budgets")
    a.add_argument("--dump-demand", action="store_true",
                   help="also write demand.csv (t,user_id,demand_bits)")
    a.set_defaults(fn=cmd_allocate)

    s = sub.add_parser("sleep", help="run the weekly cell-sleep experiment")
    _add_common(s)
    s.set_defaults(preset="table1")
    _add_gen_args(s)
    s.add_argument("--grid-size", type=float, default=500.0)
    s.add_argument("--cells-per-site", type=int, default=3)
    s.add_argument("--cell-capacity-mbps", type=float, default=50.0)
    s.add_argument("--hysteresis", type=float, default=None,
                   help="fixed h; omit to tune on day 1")
    s.set_defaults(fn=cmd_sleep)

    r = sub.add_parser("report", help="render tables and plot series from run outputs")
    r.add_argument("--out", default="out", help="directory holding run outputs")
    r.set_defaults(fn=cmd_report)
    return ap


def _apply_config_defaults(args):
    if getattr(args, "config", None):
        values = _read_config_file(args.config)
        for key, raw in values.items():
            if not hasattr(args, key):
                raise CliError(EXIT_USAGE, f"unknown config key {key!r}")
            current = getattr(args, key)
            # flags given on the command line win; config only fills defaults
            if current is None:
                if key in ("users", "horizon", "tune_episodes", "seed", "power_rounds"):
                    setattr(args, key, int(raw))
                elif key in ("lam", "nlos_db", "grid_size", "hysteresis",
                             "cell_capacity_mbps", "eta", "kappa_min", "kappa_max"):
                    setattr(args, key, float(raw))
                else:
                    setattr(args, key, raw)
    return args


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        args = _apply_config_defaults(args)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
