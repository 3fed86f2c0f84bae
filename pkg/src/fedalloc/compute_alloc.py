"""Compute-side block solver: CPU frequency, relaxed frame resolution, deadline.

The block is convex after linearizing the accuracy curve between its two
admissible resolutions, so it is solved through its Lagrange dual: the
simplex multiplier eta is found by bisection on the dual stationarity
system, per-device multipliers lambda follow in closed form, and the primal
(f, s_hat, T) is recovered analytically and clamped to its boxes.

Degenerate weight settings (w1 = 0, w2 = 0, rho = 0) each get the analytic
limit of the objective rather than the generic recovery, which breaks down
there; a fixed-deadline variant handles the w2 = 0 regime by exact
per-device enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DeadlineInfeasible
from .model import DeviceProfile, SystemConfig, Weights, accuracy, device_arrays
from .numerics import BisectionSpec, bisect_root

# 2^(-2/3) + 2^(1/3): shows up when the optimal-frequency energy and time
# terms are collapsed into a single power of lambda.
_C23 = 2.0 ** (-2.0 / 3.0) + 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class AccuracyLine:
    """Chord of the accuracy curve between s_min and s_max."""

    slope: float  # per pixel
    intercept: float  # accuracy at s_min

    def value(self, s_hat, s_min: float):
        return self.slope * (np.asarray(s_hat, dtype=float) - s_min) + self.intercept


def linearize_accuracy(cfg: SystemConfig) -> AccuracyLine:
    """Linear accuracy model that matches the true curve exactly at both ends."""
    a_lo = float(accuracy(cfg.s_min))
    a_hi = float(accuracy(cfg.s_max))
    return AccuracyLine(slope=(a_hi - a_lo) / (cfg.s_max - cfg.s_min), intercept=a_lo)


@dataclass(frozen=True)
class DualSolution:
    """Per-device multipliers for the deadline constraints."""

    lam: np.ndarray
    eta: float | None  # simplex multiplier; None in degenerate modes
    mode: str  # "standard" | "energy_only" | "time_only" | "min_resolution" | "makespan_only"


@dataclass
class ComputeSolution:
    """Recovered compute-side block: frequencies, resolutions, deadline."""

    multipliers: np.ndarray
    freq: np.ndarray
    s_relaxed: np.ndarray  # continuous, clamped to [s_min, s_max]
    s_rounded: np.ndarray  # in {s_min, s_max}
    deadline: float  # max over devices of T_cmp(s_relaxed) + T_up
    eta: float | None
    mode: str
    infeasible_mask: np.ndarray  # devices whose frequency clamps to zero


def _bisect_simplex_multiplier(t_up: np.ndarray, lam_of_eta, target: float) -> float:
    """Find eta > max(t_up) with sum(lam_of_eta(eta)) == target."""
    base = float(np.max(t_up))

    def excess(eta: float) -> float:
        lam = lam_of_eta(eta)
        s = float(np.sum(lam))
        if not np.isfinite(s):
            return np.inf
        return s - target

    # Walk lo toward the pole at max(t_up) until the sum exceeds the target,
    # and push hi outward until it falls below.
    width = max(base, 1.0)
    lo = base + width
    for _ in range(800):
        if excess(lo) > 0:
            break
        width *= 0.5
        lo = base + width
    else:
        raise ArithmeticError("could not bracket the simplex multiplier from below")

    hi = lo * 2.0 if lo > 0 else 1.0
    while excess(hi) > 0:
        hi = base + (hi - base) * 2.0
        if hi - base > 1e30:
            raise ArithmeticError("could not bracket the simplex multiplier from above")

    return bisect_root(lambda eta: excess(eta), BisectionSpec(lo=lo, hi=hi), expand_hi=False)


def _mass_on_argmax(scores: np.ndarray, total: float) -> np.ndarray:
    """Split `total` evenly over the maximizers of `scores`."""
    lam = np.zeros_like(scores)
    top = scores >= np.max(scores) * (1 - 1e-12)
    lam[top] = total / np.count_nonzero(top)
    return lam


def solve_dual(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_up: np.ndarray,
) -> DualSolution:
    """Deadline multipliers maximizing the block's concave dual.

    The returned lam sums to w2 * r_global exactly (after an exact rescale
    at the bisection root) and satisfies per-device stationarity against the
    common multiplier eta. Degenerate weight settings return the analytic
    limit instead, tagged in ``mode``.
    """
    arrays = device_arrays(devices)
    t_up = np.asarray(t_up, dtype=float)
    target = weights.w2 * cfg.r_global
    line = linearize_accuracy(cfg)
    work = cfg.r_local * cfg.zeta * arrays.work  # per s^2, cycles-per-Hz scale

    if weights.w2 == 0:
        return DualSolution(np.zeros(len(devices)), None, "energy_only")

    if weights.w1 == 0 and weights.rho == 0:
        t_cmp_floor = work * cfg.s_min**2 / arrays.f_max
        lam = _mass_on_argmax(t_cmp_floor + t_up, target)
        return DualSolution(lam, None, "makespan_only")

    if weights.w1 == 0:
        # Frequency pins to its maximum; the dual in lambda alone has
        # per-device value -C'/lambda + t_up*lambda.
        c_prime = (weights.rho * line.slope) ** 2 * arrays.f_max / (
            4.0 * cfg.r_local * cfg.zeta * arrays.work
        )

        def lam_of_eta(eta):
            return np.sqrt(c_prime / (eta - t_up))

        eta = _bisect_simplex_multiplier(t_up, lam_of_eta, target)
        lam = lam_of_eta(eta)
        lam *= target / np.sum(lam)
        return DualSolution(lam, eta, "time_only")

    if weights.rho == 0:
        # Resolution pins to its minimum; eliminating f gives per-device
        # dual value m_tilde * lambda^(2/3) + t_up * lambda.
        m = work * cfg.s_min**2
        m_tilde = m * (weights.w1 * cfg.kappa * cfg.r_global) ** (1.0 / 3.0) * _C23

        def lam_of_eta(eta):
            return ((2.0 / 3.0) * m_tilde / (eta - t_up)) ** 3

        eta = _bisect_simplex_multiplier(t_up, lam_of_eta, target)
        lam = lam_of_eta(eta)
        lam *= target / np.sum(lam)
        return DualSolution(lam, eta, "min_resolution")

    # Standard regime: eliminate both f and s_hat.
    h = cfg.r_local * cfg.zeta * arrays.work * (weights.w1 * cfg.kappa * cfg.r_global) ** (
        1.0 / 3.0
    )
    c = (weights.rho * line.slope) ** 2 / (4.0 * h * _C23)

    def lam_of_eta(eta):
        return ((2.0 / 3.0) * c / (eta - t_up)) ** 0.6

    eta = _bisect_simplex_multiplier(t_up, lam_of_eta, target)
    lam = lam_of_eta(eta)
    lam *= target / np.sum(lam)
    return DualSolution(lam, eta, "standard")


def solve_dual_boxed(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_up: np.ndarray,
) -> DualSolution:
    """Deadline multipliers with the frequency and resolution boxes priced in.

    ``solve_dual`` inverts the per-device stationarity assuming the interior
    closed forms for f and s_hat; when a box edge binds (typical: the
    relaxed resolution wanting to fall below s_min), the multipliers it
    returns recover a primal that is feasible but not block-optimal. This
    variant inverts the *clamped* compute-time map instead — piecewise over
    which box edges are active — so the clamped recovery is exactly the
    block optimum. Degenerate weight settings fall through to the analytic
    limits of ``solve_dual``.

    The returned lam sums to w2 * r_global exactly, as in ``solve_dual``.
    """
    if weights.w2 == 0 or weights.w1 == 0 or weights.rho == 0:
        return solve_dual(cfg, devices, weights, t_up)

    arrays = device_arrays(devices)
    t_up = np.asarray(t_up, dtype=float)
    target = weights.w2 * cfg.r_global
    line = linearize_accuracy(cfg)

    a = weights.w1 * cfg.kappa * cfg.r_global  # energy price on f^2 (per s^2 work)
    m = cfg.r_local * cfg.zeta * arrays.work  # compute time is m * s^2 / f
    k = weights.rho * line.slope  # accuracy reward per pixel
    f_lo, f_hi = arrays.f_min, arrays.f_max
    s_lo, s_hi = float(cfg.s_min), float(cfg.s_max)

    lam_f_lo = 2.0 * a * f_lo**3  # below: f clamps low;  above lam_f_hi: f clamps high
    lam_f_hi = 2.0 * a * f_hi**3
    d_scale = m * np.cbrt(a) * _C23  # pressure D(lam) = d_scale * lam^(2/3), f interior
    c = k**2 / (4.0 * m * np.cbrt(a) * _C23)  # interior-piece constant (as in solve_dual)

    def invert_pressure(d: np.ndarray) -> np.ndarray:
        """Multiplier at which the unclamped s_hat pressure D(lam) reaches d."""
        lam = (d / d_scale) ** 1.5
        lam = np.where(lam < lam_f_lo, f_lo * d / m - a * f_lo**3, lam)
        lam = np.where(lam > lam_f_hi, f_hi * d / m - a * f_hi**3, lam)
        return lam

    def f_of(lam: np.ndarray) -> np.ndarray:
        return np.clip(np.cbrt(lam / (2.0 * a)), f_lo, f_hi)

    # Multiplier levels where the unclamped s_hat crosses the box edges, and
    # the compute times realized there (s_hat decreases as lam grows).
    lam_s_hi = np.maximum(invert_pressure(np.full_like(m, k / (2.0 * s_hi))), 0.0)
    lam_s_lo = np.maximum(invert_pressure(np.full_like(m, k / (2.0 * s_lo))), 0.0)
    t_enter_mid = m * s_hi**2 / f_of(lam_s_hi)  # slack above: s_hat rides s_max
    t_leave_mid = m * s_lo**2 / f_of(lam_s_lo)  # slack below: s_hat rides s_min

    # Slack at a zero multiplier (finite only when the frequency floor is
    # positive); at or above it the deadline constraint is slack and lam = 0.
    safe_f_lo = np.where(f_lo > 0, f_lo, 1.0)
    with np.errstate(divide="ignore"):
        s_at_zero = np.clip(k / (2.0 * m * a * safe_f_lo**2), s_lo, s_hi)
    t_at_zero = np.where(f_lo > 0, m * s_at_zero**2 / safe_f_lo, np.inf)

    def lam_of_eta(eta: float) -> np.ndarray:
        slack = eta - t_up
        with np.errstate(over="ignore"):
            f_need_min_res = m * s_lo**2 / slack  # f required at the lowest resolution
            # s at s_max or s at s_min: invert t = m s^2 / f with f interior. The
            # lower edge is floored at the crossing multiplier so that exactly at
            # the hard floor it continues into the constant-time plateau's start.
            lam_edge_hi = 2.0 * a * (m * s_hi**2 / slack) ** 3
            lam_edge_lo = np.maximum(2.0 * a * f_need_min_res**3, lam_s_lo)
            # s interior: the closed form, patched where f clamps.
            lam_mid = ((2.0 / 3.0) * c / slack) ** 0.6
            with np.errstate(divide="ignore"):
                d_lo = 0.5 * k * np.sqrt(m / (safe_f_lo * slack))
                d_hi = 0.5 * k * np.sqrt(m / (f_hi * slack))
            lam_mid = np.where(lam_mid < lam_f_lo, f_lo * d_lo / m - a * f_lo**3, lam_mid)
            lam_mid = np.where(lam_mid > lam_f_hi, f_hi * d_hi / m - a * f_hi**3, lam_mid)

        lam = np.where(slack >= t_enter_mid, lam_edge_hi, lam_mid)
        lam = np.where(slack <= t_leave_mid, lam_edge_lo, lam)
        lam = np.where(slack >= t_at_zero, 0.0, lam)
        # Even f_max at s_min cannot finish inside this slack: eta must grow.
        return np.where(f_need_min_res > f_hi * (1.0 + 1e-12), np.inf, lam)

    # The multiplier sum is capped once every device that can still trade
    # speed for energy has hit stationarity; if the cap falls short of the
    # target, the deadline pins at the hard floor of the slowest device and
    # that device's multiplier absorbs the unclaimed mass (its compute time
    # is constant there, so any multiplier at or above the plateau start is
    # stationary).
    floor_t = m * s_lo**2 / f_hi
    eta_min = float(np.max(t_up + floor_t))
    eta_feasible = eta_min * (1.0 + 1e-12)
    lam_at_min = lam_of_eta(eta_feasible)
    if float(np.sum(lam_at_min)) <= target:
        binding = t_up + floor_t >= eta_min * (1.0 - 1e-12)
        lam = lam_at_min.copy()
        lam[binding] += (target - float(np.sum(lam_at_min))) / np.count_nonzero(binding)
        return DualSolution(lam, eta_min, "standard")

    eta = _bisect_simplex_multiplier(t_up, lam_of_eta, target)
    lam = lam_of_eta(eta)
    if not np.all(np.isfinite(lam)):  # root pinched against the floor jump
        lam = lam_of_eta(max(eta, eta_feasible) * (1.0 + 1e-12))
    lam *= target / np.sum(lam)
    return DualSolution(lam, eta, "standard")


def refit_frequencies(
    cfg: SystemConfig,
    arrays,
    weights: Weights,
    resolution: np.ndarray,
    t_up: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Exact (frequency, deadline) re-solve with resolutions held fixed.

    Rounding the relaxed resolution changes a device's compute load, so the
    frequency tuned for the relaxed value goes stale — a device whose
    resolution rounded down would finish early at an overpaid clock. With s
    fixed the remaining block (f, T) is convex and separable given the
    deadline multipliers, solved by the same plateau-aware simplex walk as
    the box-aware dual. Needs w1 > 0 and w2 > 0.

    Returns the clamped frequencies and the realized deadline.
    """
    t_up = np.asarray(t_up, dtype=float)
    a = weights.w1 * cfg.kappa * cfg.r_global
    msq = cfg.r_local * cfg.zeta * arrays.work * np.asarray(resolution, dtype=float) ** 2
    f_lo, f_hi = arrays.f_min, arrays.f_max
    target = weights.w2 * cfg.r_global
    floor_t = msq / f_hi
    safe_f_lo = np.where(f_lo > 0, f_lo, 1.0)
    t_zero = np.where(f_lo > 0, msq / safe_f_lo, np.inf)

    def lam_of_eta(eta: float) -> np.ndarray:
        slack = eta - t_up
        f_need = msq / slack
        with np.errstate(over="ignore"):
            lam = 2.0 * a * f_need**3
        lam = np.where(slack >= t_zero, 0.0, lam)
        return np.where(f_need > f_hi * (1.0 + 1e-12), np.inf, lam)

    eta_min = float(np.max(t_up + floor_t))
    lam = lam_of_eta(eta_min * (1.0 + 1e-12))
    if float(np.sum(lam)) <= target:
        binding = t_up + floor_t >= eta_min * (1.0 - 1e-12)
        lam = lam.copy()
        lam[binding] += (target - float(np.sum(lam))) / np.count_nonzero(binding)
    else:
        eta = _bisect_simplex_multiplier(t_up, lam_of_eta, target)
        lam = lam_of_eta(eta)
        if not np.all(np.isfinite(lam)):  # root pinched against the floor jump
            lam = lam_of_eta(max(eta, eta_min * (1.0 + 1e-12)) * (1.0 + 1e-12))

    freq = np.clip(np.cbrt(lam / (2.0 * a)), f_lo, f_hi)
    t_cmp = msq / freq
    return freq, float(np.max(t_cmp + t_up))


def dual_objective(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_up: np.ndarray,
    lam: np.ndarray,
) -> float:
    """Standard-regime dual value at a simplex point lam (lam > 0)."""
    arrays = device_arrays(devices)
    line = linearize_accuracy(cfg)
    h = cfg.r_local * cfg.zeta * arrays.work * (weights.w1 * cfg.kappa * cfg.r_global) ** (
        1.0 / 3.0
    )
    c = (weights.rho * line.slope) ** 2 / (4.0 * h * _C23)
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        terms = -c * lam ** (-2.0 / 3.0) + np.asarray(t_up, dtype=float) * lam
    const = weights.rho * line.slope * cfg.s_min - weights.rho * float(accuracy(cfg.s_min))
    return float(np.sum(terms) + len(devices) * const)


def recover_primal(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    dual: DualSolution,
    t_up: np.ndarray,
) -> ComputeSolution:
    """Frequencies and resolutions from the multipliers, clamped and rounded.

    The continuous resolution uses the *clamped* frequency so that it stays
    consistent with the realized energy/time; rounding maps to s_max at or
    above the midpoint. Devices whose frequency clamps to zero (possible
    when f_min = 0 and their multiplier vanishes) are flagged rather than
    silently producing an infinite deadline.
    """
    arrays = device_arrays(devices)
    t_up = np.asarray(t_up, dtype=float)
    lam = np.asarray(dual.lam, dtype=float)
    line = linearize_accuracy(cfg)
    work = cfg.r_local * cfg.zeta * arrays.work

    if dual.mode == "time_only" or dual.mode == "makespan_only":
        freq = arrays.f_max.copy()
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            f_star = np.cbrt(lam / (2.0 * weights.w1 * cfg.r_global * cfg.kappa))
        f_star = np.where(lam > 0, f_star, 0.0)
        freq = np.clip(f_star, arrays.f_min, arrays.f_max)

    infeasible = freq <= 0.0
    safe_f = np.where(infeasible, 1.0, freq)

    if dual.mode in ("min_resolution", "makespan_only"):
        s_hat = np.full(len(devices), float(cfg.s_min))
    else:
        denom = 2.0 * cfg.r_local * cfg.zeta * arrays.work * (
            weights.w1 * cfg.r_global * cfg.kappa * safe_f**2 + lam / safe_f
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            s_hat = weights.rho * line.slope / denom
        s_hat = np.where(denom > 0, s_hat, cfg.s_min)
        s_hat = np.clip(s_hat, cfg.s_min, cfg.s_max)

    midpoint = 0.5 * (cfg.s_min + cfg.s_max)
    s_rounded = np.where(s_hat >= midpoint, cfg.s_max, cfg.s_min).astype(float)

    if np.any(infeasible):
        deadline = np.inf
    else:
        t_cmp = work * s_hat**2 / freq
        deadline = float(np.max(t_cmp + t_up))

    return ComputeSolution(
        multipliers=lam,
        freq=freq,
        s_relaxed=s_hat,
        s_rounded=s_rounded,
        deadline=deadline,
        eta=dual.eta,
        mode=dual.mode,
        infeasible_mask=infeasible,
    )


def solve_compute(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_up: np.ndarray,
) -> ComputeSolution:
    """Box-aware dual solve + primal recovery in one call (the block solver
    the alternating driver uses)."""
    return recover_primal(
        cfg, devices, weights, solve_dual_boxed(cfg, devices, weights, t_up), t_up
    )


def solve_fixed_deadline(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_up: np.ndarray,
    t_slot: float,
    slack_mode: str = "per_device",
) -> ComputeSolution:
    """Exact compute-side solve when the per-round deadline is a constant.

    With T fixed the block separates per device and per discrete resolution:
    each (device, s) pair needs at least f_req = work(s) / slack, energy is
    increasing in f above that, so the candidate is f = max(f_min, f_req)
    and the cheaper feasible resolution wins (weighing energy against the
    accuracy reward).

    slack_mode "per_device" gives each device its own slack T - T_up_n;
    "shared" charges every device the worst uplink time (the rule the
    communication-only baseline uses), which is feasible-by-construction
    for all of them but looser.
    """
    arrays = device_arrays(devices)
    t_up = np.asarray(t_up, dtype=float)
    if slack_mode == "shared":
        slack = np.full(len(devices), t_slot - float(np.max(t_up)))
    elif slack_mode == "per_device":
        slack = t_slot - t_up
    else:
        raise ValueError(f"unknown slack_mode {slack_mode!r}")

    if np.any(slack <= 0):
        n = int(np.argmin(slack))
        raise DeadlineInfeasible(
            f"device {n}: uplink alone ({t_up[n]:.4g} s) exceeds the "
            f"{t_slot:.4g} s round deadline",
            device=n,
        )

    work = cfg.r_local * cfg.zeta * arrays.work
    n_dev = len(devices)
    best_cost = np.full(n_dev, np.inf)
    best_s = np.zeros(n_dev)
    best_f = np.zeros(n_dev)
    for s in (cfg.s_min, cfg.s_max):
        f_req = work * s**2 / slack
        f = np.maximum(arrays.f_min, f_req)
        ok = f <= arrays.f_max * (1 + 1e-12)
        f = np.minimum(f, arrays.f_max)
        energy = cfg.kappa * cfg.r_local * cfg.zeta * s**2 * arrays.work * f**2
        cost = weights.w1 * cfg.r_global * energy - weights.rho * float(accuracy(s))
        better = ok & (cost < best_cost)
        best_cost = np.where(better, cost, best_cost)
        best_s = np.where(better, s, best_s)
        best_f = np.where(better, f, best_f)

    if np.any(~np.isfinite(best_cost)):
        n = int(np.argmax(~np.isfinite(best_cost)))
        raise DeadlineInfeasible(
            f"device {n}: needs more than f_max to finish any resolution "
            f"within {t_slot:.4g} s",
            device=n,
        )

    return ComputeSolution(
        multipliers=np.zeros(n_dev),
        freq=best_f,
        s_relaxed=best_s.copy(),
        s_rounded=best_s.copy(),
        deadline=float(t_slot),
        eta=None,
        mode="fixed_deadline",
        infeasible_mask=np.zeros(n_dev, dtype=bool),
    )
