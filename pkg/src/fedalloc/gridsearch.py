"""Brute-force grid oracle for tiny instances (N <= 3).

Evaluates the joint objective over a full product grid: per-device power
and frequency grids, a simplex discretization of the bandwidth split, both
admissible resolutions per device, and the realized completion time.

The scan avoids materializing the full product by exploiting that, for a
fixed bandwidth split and resolution choice, each device contributes an
independent (completion time, energy) cloud of which only the Pareto
staircase matters: for any deadline candidate, the device picks its
cheapest point finishing in time. Minimizing over the union of all
staircase times is exactly equivalent to the naive product scan.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .model import (
    Allocation,
    CostBreakdown,
    DeviceProfile,
    SystemConfig,
    Weights,
    accuracy,
    device_arrays,
    evaluate,
    per_device_times,
    rate_core,
)


class _Staircase:
    """Pareto frontier of one device's (time, energy) grid points."""

    __slots__ = ("times", "energy", "flat_index")

    def __init__(self, t: np.ndarray, e: np.ndarray):
        order = np.argsort(t, kind="stable")
        self.times = t[order]
        e_sorted = e[order]
        self.energy = np.minimum.accumulate(e_sorted)
        # flat grid index of the running-minimum point at each prefix
        improving = e_sorted <= self.energy
        idx = np.where(improving, np.arange(len(e_sorted)), 0)
        self.flat_index = order[np.maximum.accumulate(idx)]

    def lookup(self, deadlines: np.ndarray):
        """(energy, flat_index) of the cheapest point finishing by each deadline;
        energy is +inf where no grid point makes it."""
        pos = np.searchsorted(self.times, deadlines, side="right") - 1
        ok = pos >= 0
        safe = np.where(ok, pos, 0)
        e = np.where(ok, self.energy[safe], np.inf)
        return e, np.where(ok, self.flat_index[safe], -1)


def _axis_grid(lo: float, hi: float, density: int) -> np.ndarray:
    if lo <= 0:
        lo = hi / density  # keep rates/frequencies strictly positive
    if hi <= lo:
        return np.array([hi])
    return np.linspace(lo, hi, density)


def _bandwidth_splits(total: float, n: int, density: int) -> np.ndarray:
    """Interior simplex grid of bandwidth shares, one row per split."""
    if n == 1:
        return np.array([[total]])
    if n == 2:
        i = np.arange(1, density)
        return np.column_stack([i, density - i]) * (total / density)
    splits = [
        (i, j, density - i - j)
        for i in range(1, density - 1)
        for j in range(1, density - i)
    ]
    return np.array(splits, dtype=float) * (total / density)


def oracle_grid_search(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    grid_density: int = 100,
) -> tuple[Allocation, CostBreakdown]:
    """Best grid point of the joint problem; cost grows as density^(3N)·2^N."""
    n = len(devices)
    if n > 3:
        raise ValueError(f"oracle supports at most 3 devices, got {n}")
    if grid_density < 2:
        raise ValueError("grid_density must be >= 2")

    arrays = device_arrays(devices)
    p_grids = [_axis_grid(arrays.p_min[i], arrays.p_max[i], grid_density) for i in range(n)]
    f_grids = [_axis_grid(arrays.f_min[i], arrays.f_max[i], grid_density) for i in range(n)]
    splits = _bandwidth_splits(cfg.total_bandwidth, n, grid_density)
    s_choices = (float(cfg.s_min), float(cfg.s_max))

    best = {"objective": np.inf}

    for s_combo in product(s_choices, repeat=n):
        acc_term = weights.rho * float(np.sum(accuracy(np.array(s_combo))))
        # compute-side curves do not depend on the bandwidth split
        comp_te = []
        for i in range(n):
            work = cfg.r_local * cfg.zeta * s_combo[i] ** 2 * arrays.work[i]
            t_c = work / f_grids[i]
            e_c = cfg.kappa * work * f_grids[i] ** 2
            comp_te.append((t_c, e_c))

        for row in splits:
            stairs = []
            for i in range(n):
                rates = rate_core(arrays.gain[i], p_grids[i], row[i], cfg.noise_density)
                t_up = arrays.bits[i] / rates
                e_tr = p_grids[i] * t_up
                t_c, e_c = comp_te[i]
                t_all = (t_up[:, None] + t_c[None, :]).ravel()
                e_all = (e_tr[:, None] + e_c[None, :]).ravel()
                stairs.append(_Staircase(t_all, e_all))

            deadlines = np.sort(np.concatenate([st.times for st in stairs]))
            total_e = np.zeros(len(deadlines))
            flats = []
            for st in stairs:
                e, flat = st.lookup(deadlines)
                total_e += e
                flats.append(flat)
            objective = (
                weights.w1 * cfg.r_global * total_e
                + weights.w2 * cfg.r_global * deadlines
                - acc_term
            )
            k = int(np.argmin(objective))
            if objective[k] < best["objective"]:
                best = {
                    "objective": float(objective[k]),
                    "split": row,
                    "s_combo": s_combo,
                    "flat": [int(f[k]) for f in flats],
                }

    if not np.isfinite(best["objective"]):
        raise ArithmeticError("no finite grid point found")

    power = np.empty(n)
    freq = np.empty(n)
    n_f = [len(f_grids[i]) for i in range(n)]
    for i in range(n):
        pi, fi = divmod(best["flat"][i], n_f[i])
        power[i] = p_grids[i][pi]
        freq[i] = f_grids[i][fi]

    alloc = Allocation(
        power=power,
        bandwidth=np.asarray(best["split"], dtype=float).copy(),
        freq=freq,
        resolution=np.array(best["s_combo"], dtype=float),
        deadline=0.0,
    )
    t_cmp, t_up = per_device_times(cfg, arrays, alloc)
    alloc.deadline = float(np.max(t_cmp + t_up))
    return alloc, evaluate(cfg, devices, weights, alloc)
