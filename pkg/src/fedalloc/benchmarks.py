"""Reference allocators the joint optimizer is compared against.

The two fixed-resolution benchmarks randomize whichever resource the sweep
axis does not control; the two single-block baselines each optimize one
side (communication or computation) under a fixed per-round deadline while
the other side is pinned by a rule.
"""

from __future__ import annotations

import numpy as np

from .compute_alloc import solve_fixed_deadline
from .errors import DeadlineInfeasible
from .link_alloc import rate_floor, solve_link
from .model import (
    Allocation,
    DeviceProfile,
    SystemConfig,
    Weights,
    device_arrays,
    per_device_times,
    rate_core,
)
from .topology import dbm_to_watts

# dBm range the random-power benchmark draws from (uniform in dBm, then boxed)
RANDOM_POWER_RANGE_DBM = (0.0, 12.0)
# Hz range the random-frequency benchmark draws from (then boxed)
RANDOM_FREQ_RANGE_HZ = (0.1e9, 2.0e9)


def _benchmark_alloc(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    rng: np.random.Generator,
    mode: str,
    resolution: np.ndarray,
) -> Allocation:
    arrays = device_arrays(devices)
    n = len(devices)
    bandwidth = np.full(n, cfg.total_bandwidth / n)

    if mode == "power_sweep":
        # the x-axis is p_max: transmit at the cap, draw frequencies
        power = arrays.p_max.copy()
        freq = np.clip(
            rng.uniform(*RANDOM_FREQ_RANGE_HZ, size=n), arrays.f_min, arrays.f_max
        )
    elif mode == "frequency_sweep":
        # the x-axis is f_max: compute at the cap, draw powers
        freq = arrays.f_max.copy()
        power = np.clip(
            dbm_to_watts(rng.uniform(*RANDOM_POWER_RANGE_DBM, size=n)),
            arrays.p_min,
            arrays.p_max,
        )
    else:
        raise ValueError(f"unknown benchmark mode {mode!r}")

    alloc = Allocation(
        power=power,
        bandwidth=bandwidth,
        freq=freq,
        resolution=np.asarray(resolution, dtype=float),
        deadline=0.0,
    )
    t_cmp, t_up = per_device_times(cfg, arrays, alloc)
    alloc.deadline = float(np.max(t_cmp + t_up))
    return alloc


def benchmark_minpixel(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    rng: np.random.Generator,
    mode: str = "power_sweep",
) -> Allocation:
    """Everything at its crude default: lowest resolution, even bandwidth,
    capped power (or frequency), the other resource drawn at random."""
    resolution = np.full(len(devices), float(cfg.s_min))
    return _benchmark_alloc(cfg, devices, rng, mode, resolution)


def benchmark_randpixel(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    rng: np.random.Generator,
    mode: str = "power_sweep",
) -> Allocation:
    """As benchmark_minpixel, but each device flips a fair coin between the
    two admissible resolutions."""
    resolution = rng.choice([float(cfg.s_min), float(cfg.s_max)], size=len(devices))
    return _benchmark_alloc(cfg, devices, rng, mode, resolution)


def _resolution_policy(cfg, n, policy, rng):
    if policy == "random":
        if rng is None:
            raise ValueError("resolution='random' needs an rng")
        return rng.choice([float(cfg.s_min), float(cfg.s_max)], size=n)
    if policy == "min":
        return np.full(n, float(cfg.s_min))
    if policy == "max":
        return np.full(n, float(cfg.s_max))
    raise ValueError(f"unknown resolution policy {policy!r}")


def comm_only(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_total: float,
    rng: np.random.Generator | None = None,
    resolution: str = "random",
) -> Allocation:
    """Optimize only the link side under a total-time budget.

    Frequencies are pinned by the rule f = R_l ζ s^2 c D / (t_slot - max T_up),
    with the worst-case uplink time taken at full power over an even
    bandwidth split — every device then finishes exactly at the slot if it
    is the slowest uploader. Power and bandwidth are optimized against the
    resulting rate floors. The pinned frequency must fit the box; a tight
    deadline at a high resolution can push it past f_max, which is reported
    as infeasible rather than silently clamped (the rule is the scheme's
    definition).
    """
    arrays = device_arrays(devices)
    n = len(devices)
    t_slot = t_total / cfg.r_global
    s = _resolution_policy(cfg, n, resolution, rng)

    power0 = arrays.p_max.copy()
    bandwidth0 = np.full(n, cfg.total_bandwidth / n)
    rates0 = rate_core(arrays.gain, power0, bandwidth0, cfg.noise_density)
    slack = t_slot - float(np.max(arrays.bits / rates0))
    if slack <= 0:
        raise DeadlineInfeasible(
            f"even-split uplink alone exceeds the {t_slot:.4g} s round slot"
        )
    freq = cfg.r_local * cfg.zeta * s**2 * arrays.work / slack
    too_fast = freq > arrays.f_max * (1 + 1e-12)
    if np.any(too_fast):
        d = int(np.argmax(too_fast))
        raise DeadlineInfeasible(
            f"device {d}: pinned frequency {freq[d]:.4g} Hz exceeds f_max "
            f"{arrays.f_max[d]:.4g} Hz at resolution {s[d]:.0f}",
            device=d,
        )
    freq = np.minimum(np.maximum(freq, arrays.f_min), arrays.f_max)

    floors = rate_floor(cfg, devices, freq, s, t_slot)
    link = solve_link(cfg, devices, weights, floors, power0, bandwidth0)
    return Allocation(
        power=link.power,
        bandwidth=link.bandwidth,
        freq=freq,
        resolution=s,
        deadline=float(t_slot),
    )


def comp_only(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    t_total: float,
) -> Allocation:
    """Optimize only the compute side under a total-time budget.

    Power is pinned at the cap and each device gets a half share of the even
    bandwidth split; frequency and resolution are then solved exactly per
    device against each one's own uplink slack.
    """
    arrays = device_arrays(devices)
    n = len(devices)
    t_slot = t_total / cfg.r_global

    power = arrays.p_max.copy()
    bandwidth = np.full(n, cfg.total_bandwidth / (2 * n))
    rates = rate_core(arrays.gain, power, bandwidth, cfg.noise_density)
    t_up = arrays.bits / rates
    comp = solve_fixed_deadline(cfg, devices, weights, t_up, t_slot, slack_mode="per_device")
    return Allocation(
        power=power,
        bandwidth=bandwidth,
        freq=comp.freq,
        resolution=comp.s_rounded,
        deadline=float(t_slot),
    )
