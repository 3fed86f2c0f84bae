"""Monte-Carlo parameter sweeps over randomized topologies.

One sweep = an axis (a box bound, the accuracy weight, or the fixed total
deadline), a grid of values, R replications, a set of algorithms, and a set
of weight triples. Every cell is a pure function of (SweepSpec, ScenarioSpec,
algorithm): replication r draws topology seed `scenario.seed + r`, shared
across grid values and algorithms for paired comparisons (disable with
paired=False to re-randomize per grid value).

Per-cell solver failures are recorded in the row's status column and the
sweep continues.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from math import nan, sqrt

import numpy as np

from .bcd import BcdParams, bcd_solve, bcd_solve_fixed_deadline
from .benchmarks import benchmark_minpixel, benchmark_randpixel, comm_only, comp_only
from .errors import FedAllocError
from .model import Weights, evaluate
from .topology import ScenarioSpec, gen_topology

AXES = ("p_max", "f_max", "rho", "t_fixed")
ALGORITHMS = ("proposed", "minpixel", "randpixel", "comm_only", "comp_only")

# independent benchmark-draw streams, one salt per randomized algorithm
_BENCH_SALTS = {"minpixel": 101, "randpixel": 102, "comm_only": 103}

CSV_COLUMNS = [
    "scenario_id",
    "seed",
    "algorithm",
    "axis_name",
    "axis_value",
    "w1",
    "w2",
    "rho",
    "total_energy_j",
    "total_time_s",
    "accuracy_sum",
    "objective",
    "bcd_rounds",
    "converged",
    # extras beyond the core schema
    "e_trans_j",
    "e_cmp_j",
    "frac_smax",
    "status",
]


@dataclass(frozen=True)
class SweepSpec:
    """Axis, grid, replication count, and weight triples of one experiment."""

    axis: str
    grid: tuple[float, ...]
    replications: int = 20
    weight_triples: tuple[tuple[float, float, float], ...] = ((0.5, 0.5, 1.0),)
    paired: bool = True
    comm_resolution: str = "min"  # deadline-sweep baseline resolution policy

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if len(self.grid) == 0:
            raise ValueError("grid must be non-empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("grid must be sorted ascending")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


def apply_axis(scenario: ScenarioSpec, axis: str, value: float) -> ScenarioSpec:
    """Scenario with the swept knob set (rho and t_fixed leave it unchanged)."""
    if axis == "p_max":
        return replace(scenario, p_max_dbm=float(value))
    if axis == "f_max":
        return replace(scenario, f_max_hz=float(value))
    return scenario


def _solve_cell(cfg, devices, weights, algorithm, axis, value, rng, params, comm_resolution):
    """(cost, frac_smax, rounds, converged) for one algorithm on one topology."""
    if algorithm == "proposed":
        if axis == "t_fixed":
            result = bcd_solve_fixed_deadline(
                cfg, devices, weights, t_slot=value / cfg.r_global, params=params
            )
        else:
            result = bcd_solve(cfg, devices, weights, params=params)
        alloc, cost = result.allocation, result.cost
        rounds, converged = result.n_rounds, result.converged
    elif algorithm in ("minpixel", "randpixel"):
        mode = "frequency_sweep" if axis == "f_max" else "power_sweep"
        bench = benchmark_minpixel if algorithm == "minpixel" else benchmark_randpixel
        alloc = bench(cfg, devices, rng, mode=mode)
        cost = evaluate(cfg, devices, weights, alloc)
        rounds, converged = 0, True
    elif algorithm == "comm_only":
        alloc = comm_only(cfg, devices, weights, value, rng=rng, resolution=comm_resolution)
        cost = evaluate(cfg, devices, weights, alloc)
        rounds, converged = 0, True
    elif algorithm == "comp_only":
        alloc = comp_only(cfg, devices, weights, value)
        cost = evaluate(cfg, devices, weights, alloc)
        rounds, converged = 0, True
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    frac_smax = float(np.mean(alloc.resolution == cfg.s_max))
    return cost, frac_smax, rounds, converged


def run_sweep(
    sweep: SweepSpec,
    scenario: ScenarioSpec,
    algorithms: list[str],
    params: BcdParams | None = None,
) -> list[dict]:
    """One row per (grid value, replication, algorithm, weight triple)."""
    for algo in algorithms:
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r}; expected subset of {ALGORITHMS}")
        if algo in ("comm_only", "comp_only") and sweep.axis != "t_fixed":
            raise ValueError(f"{algo} needs the t_fixed axis (it fixes a deadline)")

    rows: list[dict] = []
    for vi, value in enumerate(sweep.grid):
        sc = apply_axis(scenario, sweep.axis, value)
        for r in range(sweep.replications):
            seed = scenario.seed + r + (0 if sweep.paired else 100003 * (vi + 1))
            cfg, devices = gen_topology(sc, seed)
            for algo in algorithms:
                for w1, w2, rho in sweep.weight_triples:
                    if sweep.axis == "rho":
                        rho = float(value)
                    weights = Weights(w1, w2, rho)
                    rng = np.random.default_rng([seed, _BENCH_SALTS.get(algo, 1)])
                    row = {
                        "scenario_id": f"{sweep.axis}={value};rep={r}",
                        "seed": seed,
                        "algorithm": algo,
                        "axis_name": sweep.axis,
                        "axis_value": value,
                        "w1": w1,
                        "w2": w2,
                        "rho": rho,
                    }
                    try:
                        cost, frac_smax, rounds, converged = _solve_cell(
                            cfg, devices, weights, algo, sweep.axis, value, rng,
                            params, sweep.comm_resolution,
                        )
                        row.update(
                            total_energy_j=cost.total_energy,
                            total_time_s=cost.total_time,
                            accuracy_sum=cost.accuracy_sum,
                            objective=cost.objective,
                            bcd_rounds=rounds,
                            converged=converged,
                            e_trans_j=cost.e_trans * cfg.r_global,
                            e_cmp_j=cost.e_cmp * cfg.r_global,
                            frac_smax=frac_smax,
                            status="ok",
                        )
                    except FedAllocError as exc:
                        row.update(
                            total_energy_j=nan,
                            total_time_s=nan,
                            accuracy_sum=nan,
                            objective=nan,
                            bcd_rounds=0,
                            converged=False,
                            e_trans_j=nan,
                            e_cmp_j=nan,
                            frac_smax=nan,
                            status=f"error: {exc}",
                        )
                    rows.append(row)
    return rows


_AGG_METRICS = (
    "total_energy_j",
    "total_time_s",
    "accuracy_sum",
    "objective",
    "e_trans_j",
    "e_cmp_j",
    "frac_smax",
)


def aggregate(rows: list[dict], keys=("algorithm", "axis_value", "w1", "w2", "rho")):
    """Mean/std of each metric per key group (failed cells excluded, counted)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)

    out = []
    for key, members in sorted(groups.items()):
        good = [m for m in members if m["status"] == "ok"]
        agg = dict(zip(keys, key))
        agg["n"] = len(members)
        agg["n_failed"] = len(members) - len(good)
        for metric in _AGG_METRICS:
            vals = [m[metric] for m in good]
            if vals:
                mean = sum(vals) / len(vals)
                var = sum((v - mean) ** 2 for v in vals) / len(vals)
                agg[f"{metric}_mean"] = mean
                agg[f"{metric}_std"] = sqrt(var)
            else:
                agg[f"{metric}_mean"] = nan
                agg[f"{metric}_std"] = nan
        out.append(agg)
    return out


def write_csv(rows: list[dict], path: str, columns: list[str] | None = None) -> None:
    if not rows:
        raise ValueError("no rows to write")
    columns = columns or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
