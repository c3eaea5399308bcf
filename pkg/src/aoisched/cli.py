"""Command-line front end.

Subcommands ``lower-bound``, ``solve``, ``simulate``, ``sweep`` and
``oracle-check`` read a JSON experiment config and write CSV files to the
output directory. Every CSV starts with a ``#`` provenance line followed by
a header row.

Exit codes: 0 success, 1 runtime or infeasibility error, 2 invalid config.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cmdp, dual, oracle, sim
from .config import AXES, ExperimentConfig, SweepSpec, load_config
from .errors import AoISchedError, ConfigError

LOWER_BOUND_COLUMNS = ["N", "M", "aoi_lb", "W_star", "nu", "iterations"]
TRACE_COLUMNS = ["k", "W", "sum_activation", "g"]
POLICY_COLUMNS = ["sensor", "x", "q", "xi"]
SUMMARY_COLUMNS = ["policy", "seed", "N", "M", "horizon", "J", "max_scheduled"]
SENSOR_COLUMNS = ["policy", "seed", "sensor", "budget", "rho", "avg_aoi", "avg_power", "activation"]
ORACLE_COLUMNS = ["sensor", "budget", "W", "x_max", "lp_objective", "oracle_cost", "deviation"]


def sweep_columns(policies) -> list:
    cols = ["axis", "value", "N", "M", "aoi_lb", "aoi_lb_identical", "W_star", "nu"]
    for p in policies:
        cols += [f"J_{p}", f"sem_{p}"]
    if "truncated" in policies:
        cols.append("rel_gap")
    return cols


# output

def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def provenance(config: ExperimentConfig, command: str) -> str:
    seeds = ",".join(str(s) for s in config.seeds)
    omega = ",".join(repr(float(w)) for w in config.channel.power)
    return f"# command={command} seeds={seeds} git={git_describe()} omega={omega}"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def render_csv(header_line: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header_line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, header_line, columns, rows) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(header_line, columns, rows))
    return path


# experiments

def _dual_search(config: ExperimentConfig, threads: int, allow_saturated=False) -> dual.DualResult:
    return dual.run_algorithm1(
        config.network(allow_saturated=allow_saturated),
        step0=config.gamma0, eps=config.eps, max_iter=config.max_iter,
        x_max=config.x_max, threads=threads,
    )


def lower_bound_row(config: ExperimentConfig, result: dual.DualResult) -> dict:
    return {
        "N": config.N, "M": config.M, "aoi_lb": result.aoi_lower_bound,
        "W_star": result.W_star, "nu": result.nu, "iterations": result.iterations,
    }


def _policy_object(name, result):
    if name == "truncated":
        return sim.Truncated(result.policies)
    if name == "greedy":
        return sim.GreedyPowerAware()
    return sim.RoundRobin()


def simulate_runs(config: ExperimentConfig, result, threads: int) -> list:
    """``sim.run`` for every (policy, seed) in config order."""
    net = config.network()
    jobs = [
        sim.SimConfig(net, config.T, seed, _policy_object(p, result), warmup=config.warmup)
        for p in config.policies for seed in config.seeds
    ]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(sim.run, jobs))
    return [sim.run(j) for j in jobs]


def cmd_lower_bound(config: ExperimentConfig, threads: int = 1) -> dict:
    result = _dual_search(config, threads, allow_saturated=True)
    return lower_bound_row(config, result)


def cmd_solve(config: ExperimentConfig, threads: int = 1):
    result = _dual_search(config, threads)
    trace = [{"k": r.k, "W": r.W, "sum_activation": r.sum_activation, "g": r.g} for r in result.w_trace]
    policy_rows = []
    for n, p in enumerate(result.policies):
        for x in range(p.x_max):
            for q in range(p.xi.shape[1]):
                policy_rows.append({"sensor": n, "x": x + 1, "q": q, "xi": float(p.xi[x, q])})
    return lower_bound_row(config, result), trace, policy_rows


def cmd_simulate(config: ExperimentConfig, threads: int = 1):
    result = _dual_search(config, threads) if "truncated" in config.policies else None
    runs = simulate_runs(config, result, threads)
    budgets, rhos = config.power_budgets(), config.rhos()
    summary, sensors = [], []
    for r in runs:
        summary.append({
            "policy": r.policy, "seed": r.seed, "N": config.N, "M": config.M,
            "horizon": r.horizon, "J": r.network_avg_aoi, "max_scheduled": r.max_scheduled_per_slot,
        })
        for n in range(config.N):
            sensors.append({
                "policy": r.policy, "seed": r.seed, "sensor": n, "budget": budgets[n], "rho": rhos[n],
                "avg_aoi": r.per_sensor_avg_aoi[n], "avg_power": r.per_sensor_avg_power[n],
                "activation": r.per_sensor_activation[n],
            })
    return summary, sensors


def _sem(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


def sweep_point(config: ExperimentConfig, axis: str, value, threads: int = 1) -> dict:
    result = _dual_search(config, threads)
    row = {"axis": axis, "value": value, **lower_bound_row(config, result)}
    if config.budgets is None and config.rho_min == config.rho_max:
        sensor = config.network().sensors[0]
        row["aoi_lb_identical"] = dual.identical_sensor_bound(sensor, config.N, config.M, config.x_max)
    runs = simulate_runs(config, result, threads)
    for p in config.policies:
        J = [r.network_avg_aoi for r in runs if r.policy == p]
        row[f"J_{p}"] = float(np.mean(J))
        row[f"sem_{p}"] = _sem(J)
    if "truncated" in config.policies:
        row["rel_gap"] = (row["J_truncated"] - row["aoi_lb"]) / row["aoi_lb"]
    return row


def cmd_sweep(config: ExperimentConfig, axis: str | None = None, values=None, threads: int = 1) -> list:
    spec = config.sweep
    axis = axis or (spec.axis if spec is not None else None)
    if axis not in AXES:
        raise ConfigError(f"sweep axis must be one of {AXES}, got {axis!r}")
    if values is None:
        if spec is None or spec.axis != axis:
            raise ConfigError(f"no sweep values given for axis {axis}")
        values = spec.values
    values = SweepSpec(axis, tuple(values)).values
    points = [config.at(axis, v) for v in values]  # validate every point before running any
    return [sweep_point(c, axis, v, threads) for c, v in zip(points, values)]


def cmd_oracle_check(config: ExperimentConfig, threads: int = 1) -> list:
    """LP optimum against the value-iteration mixture for each unique sensor and ``W``."""
    unique = list(dict.fromkeys(config.network(allow_saturated=True).sensors))
    index = {s: n for n, s in reversed(list(enumerate(config.network(allow_saturated=True).sensors)))}
    jobs = [(s, W) for s in unique for W in config.oracle.W_grid]

    def check(job):
        s, W = job
        occ = cmdp.solve_decoupled(s, W, config.oracle.x_max)
        lp = float(np.arange(1, occ.x_max + 1) @ occ.mu.sum(axis=1) + W * occ.y.sum())
        vi = oracle.solve_cmdp_by_bisection(s, W, occ.x_max).mixed_cost
        return {
            "sensor": index[s], "budget": s.power_budget, "W": W, "x_max": occ.x_max,
            "lp_objective": lp, "oracle_cost": vi, "deviation": abs(lp - vi),
        }

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(check, jobs))
    return [check(j) for j in jobs]


# argument handling

def parse_seeds(text: str) -> tuple:
    """``"3"``, ``"1,2,5"`` or ``"0-9"`` (inclusive) into a tuple of seeds."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                seeds.extend(range(int(a), int(b) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"cannot parse seeds {text!r}") from exc
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"seeds must be nonnegative integers, got {text!r}")
    return tuple(seeds)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoisched", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", help="output directory (overrides config 'outputs')")
    common.add_argument("--seeds", help="seed list, e.g. 1,2,3 or 0-9 (overrides config)")
    common.add_argument("--horizon", type=int, help="measured slots per run (overrides config T)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    sub.add_parser("lower-bound", parents=[common], help="relaxed lower bound on network AoI")
    sub.add_parser("solve", parents=[common], help="lower bound, multiplier trace and policy tables")
    sub.add_parser("simulate", parents=[common], help="simulate each policy for each seed")
    sw = sub.add_parser("sweep", parents=[common], help="lower bound and simulations along one axis")
    sw.add_argument("--axis", choices=AXES, help="sweep axis (overrides config)")
    sw.add_argument("--values", help="comma-separated axis values (overrides config)")
    sub.add_parser("oracle-check", parents=[common], help="cross-check the LP against value iteration")
    return parser


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.out:
        changes["outputs"] = args.out
    if args.seeds:
        changes["seeds"] = parse_seeds(args.seeds)
    if args.horizon is not None:
        changes["T"] = args.horizon
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if not changes:
        return config
    data = config.to_dict()
    data.update({k: list(v) if isinstance(v, tuple) else v for k, v in changes.items()})
    return ExperimentConfig.from_dict(data)


def _run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out, cmd, threads = config.outputs, args.command, args.threads
    prov = provenance(config, cmd)

    def path(name):
        return os.path.join(out, name)

    if cmd == "lower-bound":
        row = cmd_lower_bound(config, threads)
        write_csv(path("lower_bound.csv"), prov, LOWER_BOUND_COLUMNS, [row])
        print(f"N={row['N']} M={row['M']} AoI_LB={row['aoi_lb']:.6f} W*={row['W_star']:.6f} "
              f"nu={row['nu']:.6f} iterations={row['iterations']}")
    elif cmd == "solve":
        row, trace, policy = cmd_solve(config, threads)
        write_csv(path("lower_bound.csv"), prov, LOWER_BOUND_COLUMNS, [row])
        write_csv(path("w_trace.csv"), prov, TRACE_COLUMNS, trace)
        write_csv(path("policy.csv"), prov, POLICY_COLUMNS, policy)
        print(f"AoI_LB={row['aoi_lb']:.6f} W*={row['W_star']:.6f} iterations={row['iterations']}")
    elif cmd == "simulate":
        summary, sensors = cmd_simulate(config, threads)
        write_csv(path("simulate_summary.csv"), prov, SUMMARY_COLUMNS, summary)
        write_csv(path("simulate_sensors.csv"), prov, SENSOR_COLUMNS, sensors)
        for p in config.policies:
            J = [r["J"] for r in summary if r["policy"] == p]
            print(f"{p}: J={np.mean(J):.6f} over {len(J)} seed(s)")
    elif cmd == "sweep":
        values = None
        if args.values:
            try:
                values = [float(v) for v in args.values.split(",")]
            except ValueError as exc:
                raise ConfigError(f"cannot parse sweep values {args.values!r}") from exc
        rows = cmd_sweep(config, args.axis, values, threads)
        axis = rows[0]["axis"]
        write_csv(path(f"sweep_{axis}.csv"), prov, sweep_columns(config.policies), rows)
        for r in rows:
            print(f"{axis}={r['value']} AoI_LB={r['aoi_lb']:.6f}"
                  + "".join(f" J_{p}={r[f'J_{p}']:.6f}" for p in config.policies))
    elif cmd == "oracle-check":
        rows = cmd_oracle_check(config, threads)
        write_csv(path("oracle_check.csv"), prov, ORACLE_COLUMNS, rows)
        worst = max(r["deviation"] for r in rows)
        print(f"max deviation {worst:.3e} over {len(rows)} checks (tol {config.oracle.tol:g})")
        if worst > config.oracle.tol:
            print("error: LP and oracle disagree beyond tolerance", file=sys.stderr)
            return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (AoISchedError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
