"""Command-line entry point: single solves, sweeps, and self-validation.

Thin shell over the library — each subcommand is a few calls that tests can
replay directly. Exit codes: 0 success, 2 configuration error, 3 infeasible
problem, 4 solver or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from .bcd import bcd_solve, bcd_solve_fixed_deadline, trace_to_csv
from .config import (
    bcd_params_from_config,
    load_config,
    scenario_from_config,
    weights_from_config,
)
from .errors import ConfigError, FedAllocError, InfeasibleError, SolverError
from .gridsearch import oracle_grid_search
from .link_alloc import kkt_residuals, solve_inner, solve_link
from .model import Weights, device_arrays, normalize_weights, per_device_times, rate_hessian
from .numerics import lambert_w0
from .sweeps import CSV_COLUMNS, SweepSpec, aggregate, run_sweep, write_csv
from .topology import ScenarioSpec, demanding_floor_instance, gen_topology

DEFAULT_GRIDS = {
    "p_max": (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0),
    "f_max": tuple(round(0.2e9 * k, 3) for k in range(1, 11)),
    "rho": (1.0, 5.0, 10.0, 15.0, 20.0, 30.0),
    "t_fixed": (80.0, 100.0, 150.0),
}

DEFAULT_ALGORITHMS = {
    "p_max": "proposed,minpixel",
    "f_max": "proposed,minpixel",
    "rho": "proposed",
    "t_fixed": "proposed,comm_only,comp_only",
}

# axis -> ((file stem, metrics to emit), ...)
FIGURE_FILES = {
    "p_max": (("fig3a", ("total_energy_j",)), ("fig3b", ("total_time_s",))),
    "f_max": (("fig3c", ("total_energy_j",)), ("fig3d", ("total_time_s",))),
    "rho": (("fig4a", ("frac_smax",)), ("fig4b", ("accuracy_sum",))),
    "t_fixed": (("fig8", ("total_energy_j",)), ("fig9", ("e_trans_j", "e_cmp_j"))),
}


def _write_figure_file(path: str, aggregated: list[dict], metrics) -> None:
    """Tidy long-format plot data: one row per (axis point, algorithm, metric)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["axis_value", "algorithm", "w1", "w2", "rho", "metric", "mean", "std", "n", "n_failed"]
        )
        for agg in aggregated:
            for metric in metrics:
                writer.writerow(
                    [
                        agg["axis_value"],
                        agg["algorithm"],
                        agg["w1"],
                        agg["w2"],
                        agg["rho"],
                        metric,
                        agg[f"{metric}_mean"],
                        agg[f"{metric}_std"],
                        agg["n"],
                        agg["n_failed"],
                    ]
                )


def cmd_solve(args) -> int:
    values = load_config(args.config)
    scenario = scenario_from_config(values)
    weights = weights_from_config(values)
    params = bcd_params_from_config(values)
    cfg, devices = gen_topology(scenario)

    if values["deadline_total_s"] is not None:
        result = bcd_solve_fixed_deadline(
            cfg, devices, weights, t_slot=values["deadline_total_s"] / cfg.r_global,
            params=params,
        )
    else:
        result = bcd_solve(cfg, devices, weights, params=params)

    cost = result.cost
    print(f"objective        {cost.objective:.6g}")
    print(f"total energy     {cost.total_energy:.6g} J "
          f"(transmit {cost.e_trans * cfg.r_global:.6g}, compute {cost.e_cmp * cfg.r_global:.6g})")
    print(f"total time       {cost.total_time:.6g} s")
    print(f"accuracy sum     {cost.accuracy_sum:.6g} over {cfg.n_devices} devices")
    print(f"rounds           {result.n_rounds} (converged={result.converged})")

    os.makedirs(args.out, exist_ok=True)
    alloc_path = os.path.join(args.out, "allocation.csv")
    arrays = device_arrays(devices)
    t_cmp, t_up = per_device_times(cfg, arrays, result.allocation)
    with open(alloc_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["device", "gain", "power_w", "bandwidth_hz", "freq_hz", "resolution_px",
             "t_cmp_s", "t_up_s"]
        )
        a = result.allocation
        for i in range(cfg.n_devices):
            writer.writerow(
                [i, arrays.gain[i], a.power[i], a.bandwidth[i], a.freq[i],
                 a.resolution[i], t_cmp[i], t_up[i]]
            )
    trace_path = os.path.join(args.out, "trace.csv")
    trace_to_csv(result, trace_path)
    print(f"wrote {alloc_path} and {trace_path}")
    return 0


def _weight_triples(axis: str, values: dict):
    base = normalize_weights(values["w1"], values["w2"], values["rho"])
    if axis in ("p_max", "f_max"):
        return ((0.9, 0.1, base.rho), (0.5, 0.5, base.rho), (0.1, 0.9, base.rho))
    if axis == "rho":
        return ((base.w1, base.w2, base.rho),)  # rho replaced per grid value
    return ((1.0, 0.0, base.rho),)  # fixed deadline: minimize energy/accuracy cost


def cmd_sweep(args) -> int:
    values = load_config(args.config)
    scenario = scenario_from_config(values)
    params = bcd_params_from_config(values)

    grid = (
        tuple(float(v) for v in args.grid.split(","))
        if args.grid
        else DEFAULT_GRIDS[args.axis]
    )
    algorithms = (args.algorithms or DEFAULT_ALGORITHMS[args.axis]).split(",")
    sweep = SweepSpec(
        axis=args.axis,
        grid=grid,
        replications=args.replications or values["replications"],
        weight_triples=_weight_triples(args.axis, values),
        paired=not args.unpaired,
    )
    rows = run_sweep(sweep, scenario, algorithms, params=params)

    os.makedirs(args.out, exist_ok=True)
    raw_path = os.path.join(args.out, f"sweep_{args.axis}.csv")
    write_csv(rows, raw_path, columns=CSV_COLUMNS)
    written = [raw_path]

    aggregated = aggregate(rows)
    for stem, metrics in FIGURE_FILES[args.axis]:
        path = os.path.join(args.out, f"{stem}.csv")
        _write_figure_file(path, aggregated, metrics)
        written.append(path)

    failures = sum(1 for r in rows if r["status"] != "ok")
    if failures:
        print(f"warning: {failures}/{len(rows)} cells failed (see status column)", file=sys.stderr)
    print("wrote " + ", ".join(written))
    return 0


def _check_lambert() -> tuple[bool, str]:
    x = -np.exp(-1.0) + np.logspace(-12, np.log10(1e6 + np.exp(-1.0)), 10_000)
    w = lambert_w0(x)
    resid = np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x))
    worst = float(np.max(resid))
    return worst <= 1e-12, f"max round-trip residual {worst:.3e}"


def _check_concavity() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    g = 10.0 ** rng.uniform(-13, -8, size=10_000)
    p = 10.0 ** rng.uniform(-4, -1, size=10_000)
    b = 10.0 ** rng.uniform(3, 7, size=10_000)
    dp = rng.normal(size=10_000)
    db = rng.normal(size=10_000)
    h_pp, h_pb, h_bb = rate_hessian(g, p, b, 3.98e-21)
    quad = h_pp * dp**2 + 2 * h_pb * dp * db + h_bb * db**2
    scale = np.maximum.reduce([np.abs(h_pp), np.abs(h_pb), np.abs(h_bb)])
    worst = float(np.max(quad / ((dp**2 + db**2) * scale)))
    return worst <= 1e-12, f"max normalized quadratic form {worst:.3e}"


def _check_kkt(seed: int, inject: float) -> tuple[bool, str]:
    cfg, devices, floors, p0, b0 = demanding_floor_instance(seed)
    weights = Weights(0.5, 0.5, 1.0)
    state = solve_link(cfg, devices, weights, floors, p0, b0)
    nu = state.nu * (1.0 + inject)
    inner = solve_inner(cfg, weights, devices, nu, state.beta, floors)
    res = kkt_residuals(cfg, weights, devices, floors, nu, state.beta, inner)
    worst = max(
        float(np.max(res["stationarity_power"])),
        float(np.max(res["stationarity_bandwidth"])),
        float(np.max(res["comp_slack_floor"])),
        float(res["comp_slack_budget"]),
    )
    return worst <= 1e-6, f"max relative KKT residual {worst:.3e}"


def _check_oracle(scenario: ScenarioSpec, density: int) -> tuple[bool, str]:
    sc = replace(scenario, n_devices=2)
    cfg, devices = gen_topology(sc)
    weights = Weights(0.5, 0.5, 1.0)
    result = bcd_solve(cfg, devices, weights)
    _, oracle_cost = oracle_grid_search(cfg, devices, weights, grid_density=density)
    gap = result.cost.objective - oracle_cost.objective
    ok = gap <= 0.02 * abs(oracle_cost.objective)
    return ok, (
        f"objective {result.cost.objective:.6g} vs grid {oracle_cost.objective:.6g} "
        f"(gap {gap:+.3e})"
    )


def cmd_validate(args) -> int:
    values = load_config(args.config)
    scenario = scenario_from_config(values)
    checks = [
        ("lambert_roundtrip", _check_lambert()),
        ("rate_concavity", _check_concavity()),
        ("kkt_residuals", _check_kkt(values["seed"], args.inject_nu_error)),
        ("oracle_gap", _check_oracle(scenario, args.grid_density)),
    ]
    all_ok = True
    for name, (ok, detail) in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok = all_ok and ok
    return 0 if all_ok else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedalloc",
        description="Joint power/bandwidth/frequency/resolution allocation "
        "for federated learning over an FDMA uplink",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="one topology, one joint solve")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", default="out")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="grid sweep with replications")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=tuple(DEFAULT_GRIDS))
    p_sweep.add_argument("--grid", help="comma-separated grid values (axis units)")
    p_sweep.add_argument("--algorithms", help="comma-separated algorithm names")
    p_sweep.add_argument("--replications", type=int)
    p_sweep.add_argument("--unpaired", action="store_true",
                         help="re-randomize topologies per grid value")
    p_sweep.add_argument("--out", default="out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the built-in property checks")
    p_val.add_argument("config")
    p_val.add_argument("--grid-density", type=int, default=50)
    p_val.add_argument("--inject-nu-error", type=float, default=0.0,
                       help="test hook: perturb the converged multipliers "
                       "so the KKT check must fail")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except (SolverError, FedAllocError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
