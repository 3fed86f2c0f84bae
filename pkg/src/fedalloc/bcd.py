"""Alternating block driver joining the compute-side and link-side solvers.

One round = link block (power, bandwidth at the rate floors implied by the
current schedule) followed by deadline tightening and the compute block
(frequency, relaxed resolution, deadline at the current uplink times). Each
block's result is adopted only if it improves that block's share of the
relaxed objective, so the relaxed objective is non-increasing by
construction even though the link solver is a local method.

The relaxed objective prices the resolution through the linearized accuracy
chord; resolutions are rounded to an endpoint once, on output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .compute_alloc import (
    linearize_accuracy,
    refit_frequencies,
    solve_compute,
    solve_fixed_deadline,
)
from .errors import ComputationInfeasible, ConfigError, InfeasibleError, LineSearchStalled
from .link_alloc import LinkState, inner_objective, rate_floor, solve_link
from .model import (
    Allocation,
    CostBreakdown,
    DeviceProfile,
    SystemConfig,
    Weights,
    accuracy,
    device_arrays,
    evaluate,
    rate_core,
)


@dataclass(frozen=True)
class BcdParams:
    """Driver tolerances; defaults match the reference experiment setup."""

    eps0: float = 1e-4  # scaled infinity-norm change that counts as converged
    max_rounds: int = 30
    xi: float = 0.5  # link-solver backtracking factor
    eps_newton: float = 0.01  # link-solver sufficient-decrease constant
    max_newton_iters: int = 100
    newton_norm: str = "l2"
    round_resolution_each_iter: bool = False


@dataclass(frozen=True)
class RoundRecord:
    round: int
    objective: float  # relaxed objective after the round
    objective_realized: float  # evaluated with rounded resolutions
    deadline: float
    max_change: float
    link_phi: float
    link_iters: int
    link_converged: bool
    link_adopted: bool
    compute_adopted: bool
    compute_mode: str


@dataclass
class BcdResult:
    allocation: Allocation
    cost: CostBreakdown
    rounds: list[RoundRecord]
    objective_trace: list[float]  # relaxed objective: initial point, then per round
    converged: bool

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


def _solve_link_guarded(cfg, devices, weights, floors, power, bandwidth, params) -> LinkState:
    """Run the link solver; if the block proposal fails outright, stand pat.

    Two failure modes end a block without a usable point: the line search
    stalls, or the inner solve reports the floors infeasible. The floors are
    always derived from the current schedule, so the incoming point meets
    them — infeasibility here is the degenerate tight case where the floors
    exhaust the whole budget at box-pinned powers and the block optimum is
    the current point itself. Either way the state is reported as an
    unconverged zero-iteration result at the incoming point, which the
    adopt-only-if-better rule then leaves in place — one bad block must not
    abort the whole alternation.
    """
    try:
        return solve_link(
            cfg,
            devices,
            weights,
            floors,
            power,
            bandwidth,
            xi=params.xi,
            eps=params.eps_newton,
            max_iters=params.max_newton_iters,
            norm=params.newton_norm,
        )
    except LineSearchStalled as err:
        return LinkState(
            nu=np.zeros(len(devices)),
            beta=np.zeros(len(devices)),
            power=np.asarray(power, dtype=float),
            bandwidth=np.asarray(bandwidth, dtype=float),
            mu=float("nan"),
            tau=np.zeros(len(devices)),
            phi_norm=float(err.diagnostics.get("phi_norm", float("nan"))),
            iterations=int(err.diagnostics.get("iteration", 0)),
            converged=False,
            projected=False,
        )
    except InfeasibleError:
        return LinkState(
            nu=np.zeros(len(devices)),
            beta=np.zeros(len(devices)),
            power=np.asarray(power, dtype=float),
            bandwidth=np.asarray(bandwidth, dtype=float),
            mu=float("nan"),
            tau=np.zeros(len(devices)),
            phi_norm=float("nan"),
            iterations=0,
            converged=False,
            projected=False,
        )


_POLISH_STEPS = (0.005, 0.01, 0.02, 0.04, 0.08, 0.16)


def _deadline_polish(cfg, devices, arrays, weights, alloc, cost, params):
    """Compress the deadline by re-buying uplink speed, if that pays.

    The link block minimizes transmission energy at the rate floors implied
    by the current deadline, so the alternation can lower power but never
    spend power or bandwidth to shorten the round — a real loss when the
    weighted time term dominates the weighted energy term. Probe a short
    ladder of tighter deadlines: fit frequencies to the probe deadline,
    re-solve the link block at the implied floors, refit frequencies freely,
    and keep a candidate only if its realized objective improves. Needs
    w1 > 0 (the frequency refit prices compute energy).
    """
    msq = cfg.r_local * cfg.zeta * arrays.work * np.asarray(alloc.resolution, dtype=float) ** 2
    t0 = alloc.deadline
    best_alloc, best_cost = alloc, cost

    def probe(t_try: float) -> bool:
        nonlocal best_alloc, best_cost
        rates_now = rate_core(
            arrays.gain, best_alloc.power, best_alloc.bandwidth, cfg.noise_density
        )
        window = t_try - arrays.bits / rates_now
        f_fit = np.clip(
            np.divide(msq, window, out=np.full_like(msq, np.inf), where=window > 0),
            arrays.f_min,
            arrays.f_max,
        )
        slack = t_try - msq / f_fit
        if np.any(slack <= 0):
            return False
        floors = arrays.bits / slack
        try:
            link = solve_link(
                cfg,
                devices,
                weights,
                floors,
                best_alloc.power,
                best_alloc.bandwidth,
                xi=params.xi,
                eps=params.eps_newton,
                max_iters=params.max_newton_iters,
                norm=params.newton_norm,
            )
        except (InfeasibleError, LineSearchStalled):
            return False
        t_up = arrays.bits / rate_core(arrays.gain, link.power, link.bandwidth, cfg.noise_density)
        freq, deadline = refit_frequencies(cfg, arrays, weights, alloc.resolution, t_up)
        candidate = Allocation(
            power=link.power,
            bandwidth=link.bandwidth,
            freq=freq,
            resolution=alloc.resolution,
            deadline=deadline,
        )
        candidate_cost = evaluate(cfg, devices, weights, candidate)
        if candidate_cost.objective < best_cost.objective - 1e-12:
            best_alloc, best_cost = candidate, candidate_cost
            return True
        return False

    # Walk the ladder until two steps in a row stop paying, then bisect the
    # bracket between the last improving and first non-improving step.
    good = 0.0
    bad = None
    misses = 0
    for step in _POLISH_STEPS:
        if probe(t0 * (1.0 - step)):
            good = step
            bad = None
            misses = 0
        else:
            if bad is None:
                bad = step
            misses += 1
            if misses >= 2:
                break
    if good > 0.0 and bad is not None:
        lo, hi = good, bad
        for _ in range(3):
            mid = 0.5 * (lo + hi)
            if probe(t0 * (1.0 - mid)):
                lo = mid
            else:
                hi = mid
    return best_alloc, best_cost


def default_init(cfg: SystemConfig, devices: list[DeviceProfile]):
    """Full power, an even half-budget bandwidth split (slack for the floors)."""
    arrays = device_arrays(devices)
    power = arrays.p_max.copy()
    bandwidth = np.full(len(devices), cfg.total_bandwidth / (2 * len(devices)))
    return power, bandwidth


def relaxed_objective(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    power: np.ndarray,
    bandwidth: np.ndarray,
    freq: np.ndarray,
    s_hat: np.ndarray,
    deadline: float,
) -> float:
    """Objective with continuous resolution and chord-linearized accuracy."""
    arrays = device_arrays(devices)
    line = linearize_accuracy(cfg)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    e_up = float(np.sum(power * arrays.bits / rates))
    e_cmp = float(
        np.sum(cfg.kappa * cfg.r_local * cfg.zeta * s_hat**2 * arrays.work * freq**2)
    )
    acc = float(np.sum(line.value(s_hat, cfg.s_min)))
    return (
        weights.w1 * cfg.r_global * (e_up + e_cmp)
        + weights.w2 * cfg.r_global * deadline
        - weights.rho * acc
    )


def _compute_block_value(cfg, arrays, weights, line, freq, s_hat, deadline) -> float:
    """The relaxed objective's terms that the compute block controls."""
    e_cmp = float(
        np.sum(cfg.kappa * cfg.r_local * cfg.zeta * s_hat**2 * arrays.work * freq**2)
    )
    acc = float(np.sum(line.value(s_hat, cfg.s_min)))
    return (
        weights.w1 * cfg.r_global * e_cmp
        + weights.w2 * cfg.r_global * deadline
        - weights.rho * acc
    )


def _realized_objective(cfg, devices, weights, power, bandwidth, freq, resolution) -> float:
    """Objective of the current iterate with discrete resolutions and the
    realized makespan as the deadline."""
    arrays = device_arrays(devices)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    t_up = arrays.bits / rates
    t_cmp = cfg.r_local * cfg.zeta * resolution**2 * arrays.work / freq
    alloc = Allocation(
        power=power,
        bandwidth=bandwidth,
        freq=freq,
        resolution=resolution,
        deadline=float(np.max(t_cmp + t_up)),
    )
    return evaluate(cfg, devices, weights, alloc).objective


def _max_rel_change(old: list[np.ndarray], new: list[np.ndarray]) -> float:
    worst = 0.0
    for a, b in zip(old, new):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        worst = max(worst, float(np.max(np.abs(b - a) / np.maximum(np.abs(b), 1e-30))))
    return worst


def _round_resolution(cfg: SystemConfig, s_hat: np.ndarray) -> np.ndarray:
    midpoint = 0.5 * (cfg.s_min + cfg.s_max)
    return np.where(np.asarray(s_hat) >= midpoint, cfg.s_max, cfg.s_min).astype(float)


def bcd_solve(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    params: BcdParams | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> BcdResult:
    """Joint allocation by alternating the two block solvers.

    Needs w2 > 0: with the round time unpenalized the deadline is not an
    optimization variable, which is the fixed-deadline solver's regime.
    """
    params = params or BcdParams()
    if weights.w2 == 0:
        raise ConfigError(
            "w2 = 0 leaves the round deadline unpriced; use bcd_solve_fixed_deadline"
        )
    arrays = device_arrays(devices)
    line = linearize_accuracy(cfg)

    power, bandwidth = init if init is not None else default_init(cfg, devices)
    power = np.asarray(power, dtype=float).copy()
    bandwidth = np.asarray(bandwidth, dtype=float).copy()

    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    t_up = arrays.bits / rates
    comp = solve_compute(cfg, devices, weights, t_up)
    if np.any(comp.infeasible_mask):
        n = int(np.argmax(comp.infeasible_mask))
        raise ComputationInfeasible(f"device {n}: frequency pinned to zero at the start")
    freq, s_hat, deadline = comp.freq, comp.s_relaxed, comp.deadline

    objective_trace = [
        relaxed_objective(cfg, devices, weights, power, bandwidth, freq, s_hat, deadline)
    ]
    records: list[RoundRecord] = []
    converged = False

    for k in range(1, params.max_rounds + 1):
        prev = [power, bandwidth, freq, s_hat, np.array(deadline)]

        s_floor = _round_resolution(cfg, s_hat) if params.round_resolution_each_iter else s_hat
        floors = rate_floor(cfg, devices, freq, s_floor, deadline)
        link = _solve_link_guarded(cfg, devices, weights, floors, power, bandwidth, params)
        link_adopted = inner_objective(
            cfg, weights, devices, link.power, link.bandwidth
        ) <= inner_objective(cfg, weights, devices, power, bandwidth)
        if link_adopted:
            power, bandwidth = link.power, link.bandwidth

        rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
        t_up = arrays.bits / rates
        t_cmp = cfg.r_local * cfg.zeta * s_floor**2 * arrays.work / freq
        deadline = float(np.max(t_cmp + t_up))  # never above the old value

        comp = solve_compute(cfg, devices, weights, t_up)
        compute_adopted = not np.any(comp.infeasible_mask) and _compute_block_value(
            cfg, arrays, weights, line, comp.freq, comp.s_relaxed, comp.deadline
        ) <= _compute_block_value(cfg, arrays, weights, line, freq, s_hat, deadline)
        if compute_adopted:
            freq, s_hat, deadline = comp.freq, comp.s_relaxed, comp.deadline

        objective_trace.append(
            relaxed_objective(cfg, devices, weights, power, bandwidth, freq, s_hat, deadline)
        )
        max_change = _max_rel_change(prev, [power, bandwidth, freq, s_hat, np.array(deadline)])
        records.append(
            RoundRecord(
                round=k,
                objective=objective_trace[-1],
                objective_realized=_realized_objective(
                    cfg, devices, weights, power, bandwidth, freq,
                    _round_resolution(cfg, s_hat),
                ),
                deadline=deadline,
                max_change=max_change,
                link_phi=link.phi_norm,
                link_iters=link.iterations,
                link_converged=link.converged,
                link_adopted=link_adopted,
                compute_adopted=compute_adopted,
                compute_mode=comp.mode,
            )
        )
        if max_change <= params.eps0:
            converged = True
            break

    resolution = _round_resolution(cfg, s_hat)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    t_up = arrays.bits / rates
    t_cmp = cfg.r_local * cfg.zeta * resolution**2 * arrays.work / freq
    alloc = Allocation(
        power=power,
        bandwidth=bandwidth,
        freq=freq,
        resolution=resolution,
        deadline=float(np.max(t_cmp + t_up)),
    )
    cost = evaluate(cfg, devices, weights, alloc)
    if weights.w1 > 0:
        # Rounding the resolutions changes the compute load, leaving the
        # frequencies tuned for the relaxed values stale; re-solve (f, T)
        # with the rounded resolutions fixed and keep it if it helps.
        refit_f, refit_deadline = refit_frequencies(cfg, arrays, weights, resolution, t_up)
        refit_alloc = Allocation(
            power=power,
            bandwidth=bandwidth,
            freq=refit_f,
            resolution=resolution,
            deadline=refit_deadline,
        )
        refit_cost = evaluate(cfg, devices, weights, refit_alloc)
        if refit_cost.objective < cost.objective:
            alloc, cost = refit_alloc, refit_cost
        alloc, cost = _deadline_polish(cfg, devices, arrays, weights, alloc, cost, params)
    return BcdResult(
        allocation=alloc,
        cost=cost,
        rounds=records,
        objective_trace=objective_trace,
        converged=converged,
    )


def _fixed_objective(cfg, arrays, weights, power, bandwidth, freq, resolution, t_slot) -> float:
    """Exact-accuracy objective used in the fixed-deadline regime."""
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    e_up = float(np.sum(power * arrays.bits / rates))
    e_cmp = float(
        np.sum(cfg.kappa * cfg.r_local * cfg.zeta * resolution**2 * arrays.work * freq**2)
    )
    acc = float(np.sum(accuracy(resolution)))
    return (
        weights.w1 * cfg.r_global * (e_up + e_cmp)
        + weights.w2 * cfg.r_global * t_slot
        - weights.rho * acc
    )


def fixed_deadline_init(cfg: SystemConfig, devices: list[DeviceProfile]):
    """Full power and the full budget split evenly (the baseline starting point)."""
    arrays = device_arrays(devices)
    return arrays.p_max.copy(), np.full(len(devices), cfg.total_bandwidth / len(devices))


def bcd_solve_fixed_deadline(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_slot: float,
    params: BcdParams | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> BcdResult:
    """Joint allocation when every round must fit a fixed slot of t_slot seconds.

    The compute block is exact per-device enumeration over the two admissible
    resolutions. The first pass charges every device the worst-case uplink
    time (the rule the communication-only baseline uses), so the first round
    reproduces that baseline and later rounds can only improve on it; from
    round two on, each device gets its own slack.
    """
    if t_slot <= 0:
        raise ValueError("t_slot must be positive")
    params = params or BcdParams()
    arrays = device_arrays(devices)

    power, bandwidth = init if init is not None else fixed_deadline_init(cfg, devices)
    power = np.asarray(power, dtype=float).copy()
    bandwidth = np.asarray(bandwidth, dtype=float).copy()

    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    t_up = arrays.bits / rates
    comp = solve_fixed_deadline(cfg, devices, weights, t_up, t_slot, slack_mode="shared")
    freq, resolution = comp.freq, comp.s_rounded

    objective_trace = [
        _fixed_objective(cfg, arrays, weights, power, bandwidth, freq, resolution, t_slot)
    ]
    records: list[RoundRecord] = []
    converged = False

    for k in range(1, params.max_rounds + 1):
        prev = [power, bandwidth, freq, resolution]

        floors = rate_floor(cfg, devices, freq, resolution, t_slot)
        link = _solve_link_guarded(cfg, devices, weights, floors, power, bandwidth, params)
        link_adopted = inner_objective(
            cfg, weights, devices, link.power, link.bandwidth
        ) <= inner_objective(cfg, weights, devices, power, bandwidth)
        if link_adopted:
            power, bandwidth = link.power, link.bandwidth

        rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
        t_up = arrays.bits / rates
        comp = solve_fixed_deadline(cfg, devices, weights, t_up, t_slot, slack_mode="per_device")
        cand = _fixed_objective(
            cfg, arrays, weights, power, bandwidth, comp.freq, comp.s_rounded, t_slot
        )
        cur = _fixed_objective(cfg, arrays, weights, power, bandwidth, freq, resolution, t_slot)
        compute_adopted = cand <= cur
        if compute_adopted:
            freq, resolution = comp.freq, comp.s_rounded

        objective_trace.append(
            _fixed_objective(cfg, arrays, weights, power, bandwidth, freq, resolution, t_slot)
        )
        max_change = _max_rel_change(prev, [power, bandwidth, freq, resolution])
        records.append(
            RoundRecord(
                round=k,
                objective=objective_trace[-1],
                objective_realized=evaluate(
                    cfg,
                    devices,
                    weights,
                    Allocation(power, bandwidth, freq, resolution, float(t_slot)),
                ).objective,
                deadline=t_slot,
                max_change=max_change,
                link_phi=link.phi_norm,
                link_iters=link.iterations,
                link_converged=link.converged,
                link_adopted=link_adopted,
                compute_adopted=compute_adopted,
                compute_mode="fixed_deadline",
            )
        )
        if max_change <= params.eps0:
            converged = True
            break

    alloc = Allocation(
        power=power,
        bandwidth=bandwidth,
        freq=freq,
        resolution=resolution,
        deadline=float(t_slot),
    )
    cost = evaluate(cfg, devices, weights, alloc)
    return BcdResult(
        allocation=alloc,
        cost=cost,
        rounds=records,
        objective_trace=objective_trace,
        converged=converged,
    )


def trace_to_csv(result: BcdResult, path: str) -> None:
    """Round-by-round convergence trace as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "objective_relaxed", "objective_realized", "delta", "sp2_iters"])
        for rec in result.rounds:
            delta = rec.objective - result.objective_trace[rec.round - 1]
            writer.writerow(
                [rec.round, rec.objective, rec.objective_realized, delta, rec.link_iters]
            )
