"""Link-side block solver: transmission power and bandwidth on an FDMA uplink.

Minimizing the summed upload energies p_n d_n / G_n(p_n, B_n) subject to
per-device rate floors and a shared bandwidth budget is a sum-of-ratios
program. It is solved locally by a parametric Newton-like outer loop over
per-device auxiliary multipliers (nu, beta); each outer trial re-solves an
inner convex problem that has a closed form: a single bandwidth-price mu is
rooted by bisection (through the Lambert W function), devices whose floors
bind get their bandwidth from the price directly, and the remaining devices
reduce to a one-constraint linear program solved greedily.

When a power box binds where the closed form assumes an interior optimum,
the violating devices are moved to a pinned set held at the box edge: each
demands the larger of its price-driven slack bandwidth and the least
bandwidth meeting its floor there, and the price is re-rooted until the set
stabilizes. Only if that assembly still fails numerically does a projection
fallback assign each device the least bandwidth meeting its floor at full
power and spread the remaining budget evenly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetInfeasible,
    DeadlineInfeasible,
    FloorInfeasible,
    LineSearchStalled,
    TransmissionInfeasible,
)
from .model import DeviceProfile, SystemConfig, Weights, device_arrays, rate_core
from .numerics import BisectionSpec, bisect_root, illinois_root, lambert_w0

LN2 = np.log(2.0)


@dataclass(frozen=True)
class InnerSolution:
    """One inner convex solve: powers, bandwidths, and its multipliers."""

    power: np.ndarray
    bandwidth: np.ndarray
    mu: float  # bandwidth price
    tau: np.ndarray  # rate-floor multipliers
    projected: bool  # True when the box-repair fallback produced the point
    pinned: np.ndarray | None = None  # devices held at a power-box edge
    pin_power: np.ndarray | None = None  # the edge each pinned device sits on


@dataclass(frozen=True)
class StepRecord:
    """One accepted outer step (for convergence plots and step-contract checks)."""

    iteration: int
    phi_before: float
    phi_after: float
    step_exponent: int
    objective: float


@dataclass
class LinkState:
    """Outer-loop state: multipliers, matched inner solution, and history."""

    nu: np.ndarray
    beta: np.ndarray
    power: np.ndarray
    bandwidth: np.ndarray
    mu: float
    tau: np.ndarray
    phi_norm: float
    iterations: int
    converged: bool
    projected: bool
    trace: list[StepRecord] = field(default_factory=list)


def rate_floor(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    freq: np.ndarray,
    resolution: np.ndarray,
    t_slot: float,
) -> np.ndarray:
    """Minimum uplink rate each device needs to fit training + upload in t_slot."""
    arrays = device_arrays(devices)
    freq = np.asarray(freq, dtype=float)
    if np.any(freq <= 0):
        n = int(np.argmax(freq <= 0))
        raise DeadlineInfeasible(f"device {n}: zero CPU frequency leaves no uplink slack", device=n)
    t_cmp = cfg.r_local * cfg.zeta * np.asarray(resolution, dtype=float) ** 2 * arrays.work / freq
    slack = t_slot - t_cmp
    if np.any(slack <= 0):
        n = int(np.argmin(slack))
        raise DeadlineInfeasible(
            f"device {n}: computation time {t_cmp[n]:.4g} s leaves no room in the "
            f"{t_slot:.4g} s round",
            device=n,
        )
    return arrays.bits / slack


def init_multipliers(
    cfg: SystemConfig,
    weights: Weights,
    devices: list[DeviceProfile],
    power: np.ndarray,
    bandwidth: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Consistent (nu, beta) for a feasible starting point."""
    arrays = device_arrays(devices)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    if np.any(rates <= 0):
        raise TransmissionInfeasible("initial point has a zero-rate device")
    nu = weights.w1 * cfg.r_global / rates
    beta = np.asarray(power, dtype=float) * arrays.bits / rates
    return nu, beta


def phi_vector(
    cfg: SystemConfig,
    weights: Weights,
    devices: list[DeviceProfile],
    nu: np.ndarray,
    beta: np.ndarray,
    power: np.ndarray,
    bandwidth: np.ndarray,
) -> np.ndarray:
    """Residual of the multiplier fixed-point conditions, stacked (2N,)."""
    arrays = device_arrays(devices)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    top = -np.asarray(power) * arrays.bits + beta * rates
    bottom = -weights.w1 * cfg.r_global + nu * rates
    return np.concatenate([top, bottom])


def power_on_ray(lam, bandwidth, gain, noise_density):
    """Power paired with a bandwidth on the stationarity ray with rate factor lam."""
    return (np.asarray(lam, dtype=float) - 1.0) * noise_density * np.asarray(bandwidth) / gain


def _per_band_demand(mu: float, j: np.ndarray, floors: np.ndarray) -> np.ndarray:
    """Bandwidth each device's floor demands at price mu (continuous in mu)."""
    z = (mu - j) / (np.e * j)
    w = lambert_w0(z)
    with np.errstate(divide="ignore"):
        return floors * LN2 / (1.0 + w)


def _a_of_mu(mu: float, j: np.ndarray) -> np.ndarray:
    """The combined multiplier level nu*beta + tau implied by price mu."""
    z = (mu - j) / (np.e * j)
    w = lambert_w0(z)
    small = np.abs(z) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small, 1.0 + z, z / np.where(small, 1.0, w))
    return np.e * j * LN2 * ratio


def _zeta_per_hz(theta):
    """Marginal rate from an extra Hz at SNR theta (bits/s/Hz); grows with theta."""
    theta = np.asarray(theta, dtype=float)
    return np.log2(1.0 + theta) - theta / ((1.0 + theta) * LN2)


def _pinned_band_slack(mu: float, nb, gain, p_pin, n0):
    """Bandwidth a box-pinned, floor-slack device asks for at price mu.

    Solves nu*beta * d(rate)/d(bandwidth) == mu for the bandwidth at the
    pinned power. Substituting u = 1 + SNR turns the condition into ln(u) +
    1/u = 1 + mu*ln2/(nu*beta), solved by the Lambert function; the demand
    is continuous, decreasing in mu, vanishing as mu -> inf and unbounded
    as mu -> 0+.
    """
    nb = np.asarray(nb, dtype=float)
    with np.errstate(over="ignore"):
        q = 1.0 + mu * LN2 / nb
    w = lambert_w0(-np.exp(-np.minimum(q, 700.0)))
    # SNR theta = -(1 + w)/w, so bandwidth = gain*p_pin/(n0*theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        band = gain * p_pin * (-w) / (n0 * (1.0 + w))
    return np.where(w == 0.0, 0.0, band)


def _unjustified_pins(
    arrays,
    n0: float,
    nu: np.ndarray,
    nb: np.ndarray,
    pinned: np.ndarray,
    pin_power: np.ndarray,
    bandwidth: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Indices of pins whose box-multiplier sign is wrong.

    A device held at its power cap needs the marginal rate value to dominate
    the energy price (and the reverse at the power floor); otherwise the pin
    came from a stale hint and the solve should rerun without it. The slack
    is loose on purpose: legitimately pinned devices can sit with a
    near-zero multiplier and must not be bounced on rounding noise.
    """
    idx = np.flatnonzero(pinned)
    if idx.size == 0:
        return idx
    theta = arrays.gain[idx] * pin_power[idx] / (n0 * bandwidth[idx])
    a_pin = mu / _zeta_per_hz(theta)
    marginal = a_pin * arrays.gain[idx] / (n0 * (1.0 + theta) * LN2)
    value = nu[idx] * arrays.bits[idx]
    at_hi = pin_power[idx] == arrays.p_max[idx]
    bad = np.where(
        at_hi, marginal < value * (1.0 - 1e-6), marginal > value * (1.0 + 1e-6)
    )
    return idx[bad]


def _min_band_at_power(gain: float, floor: float, p: float, n0: float, b_hint: float) -> float:
    """Least bandwidth meeting `floor` at fixed power p (rate is increasing in B)."""
    asymptote = gain * p / (n0 * LN2)
    if floor >= asymptote:
        raise FloorInfeasible(
            f"rate floor {floor:.4g} b/s unreachable even with unlimited bandwidth "
            f"at p={p:.4g} W (limit {asymptote:.4g} b/s)"
        )

    def gap(b: float) -> float:
        return rate_core(gain, p, b, n0) - floor

    lo = b_hint
    for _ in range(200):
        if gap(lo) < 0:
            break
        lo *= 0.5
    return bisect_root(gap, BisectionSpec(lo=lo, hi=lo * 2.0), expand_hi=True)


def _project_to_floors(
    arrays, cfg: SystemConfig, floors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Feasible fallback: minimal bandwidth at p_max per device, leftover spread evenly."""
    n = len(floors)
    b_need = np.empty(n)
    for i in range(n):
        b_need[i] = _min_band_at_power(
            arrays.gain[i], floors[i], arrays.p_max[i], cfg.noise_density, b_hint=floors[i]
        )
    total = float(np.sum(b_need))
    if total > cfg.total_bandwidth * (1 + 1e-12):
        raise BudgetInfeasible(
            f"floors need {total:.6g} Hz at full power but the budget is "
            f"{cfg.total_bandwidth:.6g} Hz"
        )
    bandwidth = b_need + (cfg.total_bandwidth - total) / n
    # Power that meets the floor exactly at the final bandwidth (<= p_max since
    # bandwidth >= b_need), lifted into the box if it falls below p_min.
    power = (2.0 ** (floors / bandwidth) - 1.0) * cfg.noise_density * bandwidth / arrays.gain
    power = np.clip(power, arrays.p_min, arrays.p_max)
    return power, bandwidth


def solve_inner(
    cfg: SystemConfig,
    weights: Weights,
    devices: list[DeviceProfile],
    nu: np.ndarray,
    beta: np.ndarray,
    floors: np.ndarray,
    pin_hint: np.ndarray | None = None,
    pin_power_hint: np.ndarray | None = None,
    mu_hint: float | None = None,
    need_cache: dict | None = None,
) -> InnerSolution:
    """Inner convex solve for fixed multipliers (nu, beta) > 0.

    A single bandwidth price mu clears the shared budget. Floor-bound
    devices demand the bandwidth that meets their floor on the power
    stationarity ray (through Lambert W); floor-slack devices fill leftover
    bandwidth through a greedy linear program over the bandwidth intervals
    their power boxes induce. Devices whose ray power would leave the box
    are moved to a pinned set — held at the box edge, demanding the larger
    of their price-driven slack bandwidth and the least bandwidth meeting
    their floor there — and the price is re-rooted until the set is stable
    and every pinned device's box multiplier has the right sign. If the
    assembled point still violates a floor or the budget (degenerate
    boxes), a projection fallback restores feasibility.

    pin_hint / pin_power_hint / mu_hint seed the pinned set and the price
    bracket from a nearby solve (the hinted set is re-validated, so the
    result is the same, just cheaper); need_cache caches the per-device
    floor-meeting bandwidths across calls that share the same floors.
    """
    arrays = device_arrays(devices)
    nu = np.maximum(np.asarray(nu, dtype=float), 1e-300)
    beta = np.maximum(np.asarray(beta, dtype=float), 1e-300)
    floors = np.asarray(floors, dtype=float)
    n0 = cfg.noise_density
    n_dev = len(devices)

    j = nu * arrays.bits * n0 / arrays.gain
    nb = nu * beta

    if need_cache is None:
        need_cache = {}
    for key in ("hi", "lo"):
        need_cache.setdefault(key, np.full(n_dev, np.nan))

    def edge_need(i: int, pin_power: np.ndarray) -> float:
        if floors[i] <= 0.0:
            return 0.0
        key = "hi" if pin_power[i] == arrays.p_max[i] else "lo"
        cached = need_cache[key][i]
        if not np.isnan(cached):
            return float(cached)
        val = _min_band_at_power(
            arrays.gain[i],
            floors[i],
            float(pin_power[i]),
            n0,
            b_hint=float(floors[i]) * LN2,
        )
        need_cache[key][i] = val
        return val

    def run_passes(pinned: np.ndarray, pin_power: np.ndarray, mu_seed: float | None):
        """Grow the pinned set to a stable assembly; None signals projection."""
        b_need = np.zeros(n_dev)
        for i in np.flatnonzero(pinned):
            b_need[i] = edge_need(i, pin_power)
        mu = mu_seed

        for _ in range(n_dev + 2):
            free = ~pinned
            if np.any(pinned):
                need_total = float(np.sum(b_need[pinned]))
                if need_total >= cfg.total_bandwidth * (1.0 - 1e-12):
                    raise BudgetInfeasible(
                        f"box-pinned devices need {need_total:.6g} Hz for their floors "
                        f"but the budget is {cfg.total_bandwidth:.6g} Hz"
                    )

            # demand_gap runs ~15 times per pass: hoist the set slices and
            # fold both Lambert evaluations into one concatenated call.
            any_pin = bool(np.any(pinned))
            j_free = j[free]
            floors_free = floors[free]
            n_free = j_free.size
            if any_pin:
                nb_pin = nb[pinned]
                gain_pin = arrays.gain[pinned]
                p_pin = pin_power[pinned]
                need_pin = b_need[pinned]

            def demand_gap(mu: float) -> float:
                z = (mu - j_free) / (np.e * j_free)
                if any_pin:
                    q = 1.0 + mu * LN2 / nb_pin
                    z = np.concatenate([z, -np.exp(-np.minimum(q, 700.0))])
                w = lambert_w0(z)
                total = 0.0
                if n_free:
                    with np.errstate(divide="ignore"):
                        total += float(np.sum(floors_free * LN2 / (1.0 + w[:n_free])))
                if any_pin:
                    w_pin = w[n_free:]
                    with np.errstate(divide="ignore", invalid="ignore"):
                        band = gain_pin * p_pin * (-w_pin) / (n0 * (1.0 + w_pin))
                    slack_b = np.where(w_pin == 0.0, 0.0, band)
                    total += float(np.sum(np.maximum(slack_b, need_pin)))
                return total - cfg.total_bandwidth

            # Bracket the price: demand blows up as mu -> 0+ and shrinks
            # toward the pinned floor demand (< budget, above) as mu -> inf.
            if mu is not None and mu > 0:
                lo, hi = float(mu), float(mu) * 2.0
            else:
                scale = np.concatenate([j[free], nb[pinned]]) if any_pin else j
                lo, hi = float(np.min(scale)), float(np.max(scale)) * 2.0
            flo = demand_gap(lo)
            for _ in range(1200):
                if flo > 0:
                    break
                lo *= 0.5
                flo = demand_gap(lo)
            else:
                raise FloorInfeasible(
                    "no bandwidth price found: demand never exceeds the budget"
                )
            fhi = demand_gap(hi)
            for _ in range(400):
                if fhi < 0:
                    break
                hi *= 2.0
                fhi = demand_gap(hi)
            else:
                raise BudgetInfeasible(
                    "no bandwidth price clears the budget: the floors outsize it at any price"
                )

            mu = illinois_root(demand_gap, lo, hi, flo, fhi)

            power_raw = np.empty(n_dev)  # pre-clamp powers, for pin detection
            bandwidth = np.empty(n_dev)
            tau = np.zeros(n_dev)

            if np.any(pinned):
                slack_b = _pinned_band_slack(
                    mu, nb[pinned], arrays.gain[pinned], pin_power[pinned], n0
                )
                bandwidth[pinned] = np.maximum(slack_b, b_need[pinned])
                power_raw[pinned] = pin_power[pinned]
                theta_pin = arrays.gain[pinned] * pin_power[pinned] / (n0 * bandwidth[pinned])
                tau[pinned] = np.maximum(mu / _zeta_per_hz(theta_pin) - nb[pinned], 0.0)

            a = _a_of_mu(mu, j)
            tight = free & (a - nb > 0)
            tau[tight] = (a - nb)[tight]

            if np.any(tight):
                z = (mu - j[tight]) / (np.e * j[tight])
                w = lambert_w0(z)
                bandwidth[tight] = floors[tight] * LN2 / (1.0 + w)
                # rate factor Lambda = exp(1 + W); power on the stationarity ray
                power_raw[tight] = (
                    np.expm1(1.0 + w) * n0 * bandwidth[tight] / arrays.gain[tight]
                )

            loose = free & ~tight
            if np.any(loose):
                lam0 = beta[loose] * arrays.gain[loose] / (n0 * arrays.bits[loose] * LN2)
                if np.any(lam0 <= 1.0):
                    raise FloorInfeasible(
                        "degenerate multipliers: a floor-slack device has rate factor <= 1"
                    )
                ray = (lam0 - 1.0) * n0 / arrays.gain[loose]  # power per Hz on the ray
                b_lo = floors[loose] / np.log2(lam0)  # least ray bandwidth meeting floor
                b_hi = arrays.p_max[loose] / ray
                b_lo = np.minimum(b_lo, b_hi)  # floor beyond the box: pinned next pass

                used = float(np.sum(bandwidth[~loose])) if not np.all(loose) else 0.0
                leftover = cfg.total_bandwidth - used - float(np.sum(b_lo))
                grant = b_lo.copy()
                if leftover > 0:
                    # residual linear program cost (most negative first)
                    kappa_lp = nb[loose] / LN2 - j[loose] - nb[loose] * np.log2(lam0)
                    for idx in np.argsort(kappa_lp):
                        room = b_hi[idx] - grant[idx]
                        step = min(room, leftover)
                        grant[idx] += step
                        leftover -= step
                        if leftover <= 0:
                            break
                    if leftover > 0:
                        # every loose device is power-capped; the surplus pushes
                        # them past their rays and they get pinned next pass
                        grant += leftover / np.count_nonzero(loose)
                bandwidth[loose] = grant
                power_raw[loose] = (lam0 - 1.0) * n0 * grant / arrays.gain[loose]

            power = np.clip(power_raw, arrays.p_min, arrays.p_max)
            rates = rate_core(arrays.gain, power, bandwidth, n0)
            newly_hi = free & (
                (power_raw > arrays.p_max * (1.0 + 1e-12)) | (rates < floors * (1.0 - 1e-9))
            )
            newly_lo = free & ~newly_hi & (power_raw < arrays.p_min * (1.0 - 1e-12))
            newly_pinned = newly_hi | newly_lo
            if not np.any(newly_pinned):
                over_budget = float(np.sum(bandwidth)) > cfg.total_bandwidth * (1 + 1e-9)
                if not over_budget and np.all(rates >= floors * (1 - 1e-9)):
                    return InnerSolution(
                        power,
                        bandwidth,
                        float(mu),
                        tau,
                        projected=False,
                        pinned=pinned.copy(),
                        pin_power=pin_power.copy(),
                    )
                return None  # assembly failed numerically
            pin_power[newly_hi] = arrays.p_max[newly_hi]
            pin_power[newly_lo] = arrays.p_min[newly_lo]
            pinned |= newly_pinned
            for i in np.flatnonzero(newly_pinned):
                b_need[i] = edge_need(i, pin_power)
        return None  # pass budget exhausted

    hinted = pin_hint is not None and pin_power_hint is not None and bool(np.any(pin_hint))
    solution = None
    if hinted:
        solution = run_passes(
            np.asarray(pin_hint, dtype=bool).copy(),
            np.asarray(pin_power_hint, dtype=float).copy(),
            mu_hint,
        )
        if solution is not None and _unjustified_pins(
            arrays, n0, nu, nb, solution.pinned, solution.pin_power,
            solution.bandwidth, float(solution.mu),
        ).size:
            solution = None  # a hinted pin has the wrong multiplier sign: redo
    if solution is None:
        solution = run_passes(np.zeros(n_dev, dtype=bool), np.zeros(n_dev), None)
    if solution is not None:
        return solution

    power, bandwidth = _project_to_floors(arrays, cfg, floors)
    return InnerSolution(
        power,
        bandwidth,
        0.0,
        np.zeros(n_dev),
        projected=True,
        pinned=np.zeros(n_dev, dtype=bool),
        pin_power=np.zeros(n_dev),
    )


def inner_objective(
    cfg: SystemConfig,
    weights: Weights,
    devices: list[DeviceProfile],
    power: np.ndarray,
    bandwidth: np.ndarray,
) -> float:
    """Link-block objective: weighted total upload energy across rounds."""
    arrays = device_arrays(devices)
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    return float(weights.w1 * cfg.r_global * np.sum(power * arrays.bits / rates))


def _norm(v: np.ndarray, kind: str) -> float:
    if kind == "l2":
        return float(np.linalg.norm(v))
    if kind == "linf":
        return float(np.max(np.abs(v)))
    raise ValueError(f"unknown norm {kind!r}")


def solve_link(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    floors: np.ndarray,
    power0: np.ndarray,
    bandwidth0: np.ndarray,
    xi: float = 0.5,
    eps: float = 0.01,
    max_iters: int = 100,
    phi_tol: float | None = None,
    norm: str = "l2",
    j_max: int = 60,
) -> LinkState:
    """Newton-like outer loop over (beta, nu) with backtracking line search.

    Starts from consistent multipliers at the feasible point (power0,
    bandwidth0). Each iteration takes the diagonal-Jacobian step toward the
    multiplier fixed point; a trial step is accepted once the residual norm
    (evaluated at the trial's own inner solution — the inner problem is
    re-solved per trial) contracts by the (1 - eps*xi^j) factor. Stops when
    the residual falls below phi_tol, default 1e-8 * (1 + initial residual),
    or after max_iters iterations (state flagged unconverged). Two early
    exits cut off unproductive tails: five consecutive accepted steps that
    barely move the residual (a binding power box can leave the multiplier
    fixed point unreachable), or ten consecutive accepted steps that leave
    the block objective unimproved beyond 1e-5 relative (the remaining
    iterations would only polish multipliers below what any caller that
    alternates on objective value can distinguish).

    With w1 == 0 the block objective vanishes; any feasible point is optimal
    and the one chosen maximizes rate slack (full power, bandwidth
    proportional to floors), skipping the loop entirely.
    """
    if not 0 < xi < 1:
        raise ValueError("xi must be in (0, 1)")
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")

    arrays = device_arrays(devices)
    floors = np.asarray(floors, dtype=float)

    if weights.w1 == 0:
        share = floors / float(np.sum(floors))
        bandwidth = share * cfg.total_bandwidth
        power = arrays.p_max.copy()
        rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
        projected = False
        if np.any(rates < floors):
            power, bandwidth = _project_to_floors(arrays, cfg, floors)
            projected = True
        return LinkState(
            nu=np.zeros(len(devices)),
            beta=power * arrays.bits / rate_core(arrays.gain, power, bandwidth, cfg.noise_density),
            power=power,
            bandwidth=bandwidth,
            mu=0.0,
            tau=np.zeros(len(devices)),
            phi_norm=0.0,
            iterations=0,
            converged=True,
            projected=projected,
        )

    need_cache: dict = {}
    nu, beta = init_multipliers(cfg, weights, devices, power0, bandwidth0)
    inner = solve_inner(cfg, weights, devices, nu, beta, floors, need_cache=need_cache)
    phi = phi_vector(cfg, weights, devices, nu, beta, inner.power, inner.bandwidth)
    phi_norm = _norm(phi, norm)
    tol = phi_tol if phi_tol is not None else 1e-8 * (1.0 + phi_norm)

    state = LinkState(
        nu=nu,
        beta=beta,
        power=inner.power,
        bandwidth=inner.bandwidth,
        mu=inner.mu,
        tau=inner.tau,
        phi_norm=phi_norm,
        iterations=0,
        converged=phi_norm <= tol,
        projected=inner.projected,
    )

    stalled_iters = 0
    best_obj = np.inf
    plateau_iters = 0
    j_start = 0
    for i in range(max_iters):
        if state.phi_norm <= tol:
            break
        rates = rate_core(arrays.gain, state.power, state.bandwidth, cfg.noise_density)
        sigma_beta = state.power * arrays.bits / rates - state.beta
        sigma_nu = weights.w1 * cfg.r_global / rates - state.nu
        phi_prev = state.phi_norm

        accepted = False
        # Resume the backtracking scan one step above the previously accepted
        # size (trying a 2x larger step first), wrapping around to the small
        # exponents; the step size then tracks the local contraction regime
        # at ~2 inner solves per iteration instead of a full rescan.
        first = max(j_start - 1, 0)
        for step_exp in [*range(first, j_max + 1), *range(0, first)]:
            t = xi**step_exp
            beta_t = np.maximum(state.beta + t * sigma_beta, 1e-300)
            nu_t = np.maximum(state.nu + t * sigma_nu, 1e-300)
            inner_t = solve_inner(
                cfg,
                weights,
                devices,
                nu_t,
                beta_t,
                floors,
                pin_hint=inner.pinned,
                pin_power_hint=inner.pin_power,
                mu_hint=inner.mu if inner.mu > 0 else None,
                need_cache=need_cache,
            )
            phi_t = phi_vector(
                cfg, weights, devices, nu_t, beta_t, inner_t.power, inner_t.bandwidth
            )
            phi_t_norm = _norm(phi_t, norm)
            if phi_t_norm <= (1.0 - eps * t) * state.phi_norm:
                state.trace.append(
                    StepRecord(
                        iteration=i,
                        phi_before=state.phi_norm,
                        phi_after=phi_t_norm,
                        step_exponent=step_exp,
                        objective=inner_objective(
                            cfg, weights, devices, inner_t.power, inner_t.bandwidth
                        ),
                    )
                )
                state.nu, state.beta = nu_t, beta_t
                state.power, state.bandwidth = inner_t.power, inner_t.bandwidth
                state.mu, state.tau = inner_t.mu, inner_t.tau
                state.phi_norm = phi_t_norm
                state.projected = inner_t.projected
                state.iterations = i + 1
                inner = inner_t
                j_start = step_exp
                accepted = True
                break
        if not accepted:
            raise LineSearchStalled(
                f"no contraction after {j_max} backtracking steps",
                diagnostics={
                    "iteration": i,
                    "phi_norm": state.phi_norm,
                    "floors": floors,
                    "power": state.power,
                    "bandwidth": state.bandwidth,
                },
            )
        # A run of accepted steps that barely move the residual means the
        # fixed point is out of reach (a power box binds the inner problem
        # away from the interior stationarity structure); stop early rather
        # than grinding out the full budget of near-no-op line searches.
        if state.phi_norm >= (1.0 - 1e-6) * phi_prev:
            stalled_iters += 1
            if stalled_iters >= 5:
                break
        else:
            stalled_iters = 0
        # Once the block objective stops moving, further iterations only
        # polish the multipliers; callers that alternate blocks on objective
        # value gain nothing from them.
        obj_i = state.trace[-1].objective
        if not np.isfinite(best_obj) or obj_i < best_obj - 1e-5 * abs(best_obj):
            best_obj = obj_i
            plateau_iters = 0
        else:
            plateau_iters += 1
            if plateau_iters >= 10:
                break

    state.converged = state.phi_norm <= tol
    return state


def kkt_residuals(
    cfg: SystemConfig,
    weights: Weights,
    devices: list[DeviceProfile],
    floors: np.ndarray,
    nu: np.ndarray,
    beta: np.ndarray,
    inner: InnerSolution,
) -> dict:
    """Relative first-order residuals of one inner solve.

    stationarity_power / stationarity_bandwidth are the per-device gradient
    residuals of the inner Lagrangian (scaled by the size of their leading
    terms); comp_slack_floor / comp_slack_budget are the complementary
    slackness products (scaled by multiplier * constraint level). All vanish
    where no power box binds.
    """
    arrays = device_arrays(devices)
    p, b = inner.power, inner.bandwidth
    theta = arrays.gain * p / (cfg.noise_density * b)
    rates = rate_core(arrays.gain, p, b, cfg.noise_density)
    a = nu * beta + inner.tau

    grad_p = nu * arrays.bits - a * arrays.gain / (cfg.noise_density * (1.0 + theta) * LN2)
    stat_p = np.abs(grad_p) / (nu * arrays.bits)

    grad_b = -a * np.log2(1.0 + theta) + a * theta / ((1.0 + theta) * LN2) + inner.mu
    scale_b = a * np.log2(1.0 + theta) + inner.mu
    stat_b = np.abs(grad_b) / scale_b

    cs_floor = np.abs(inner.tau * (rates - floors)) / np.maximum(inner.tau * floors, 1e-300)
    cs_budget = abs(inner.mu * (float(np.sum(b)) - cfg.total_bandwidth)) / max(
        inner.mu * cfg.total_bandwidth, 1e-300
    )
    return {
        "stationarity_power": stat_p,
        "stationarity_bandwidth": stat_b,
        "comp_slack_floor": cs_floor,
        "comp_slack_budget": cs_budget,
    }
