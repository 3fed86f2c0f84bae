"""Random scenario generation: geometry, path loss, shadow fading, workloads.

Devices are dropped uniformly by area on a disk around the base station;
channel gain combines log-distance path loss with a single lognormal shadow
draw per device (the channel is static over a training run). All dBm/GHz
conversions happen here — everything downstream of it is SI.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import DeviceProfile, SystemConfig, rate_core

PATHLOSS_FIXED_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6  # per decade of distance in km
MIN_DISTANCE_M = 1.0  # clip to avoid the path-loss singularity at the mast


def dbm_to_watts(x) -> float:
    return 1e-3 * 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def watts_to_dbm(w) -> float:
    return 10.0 * np.log10(np.asarray(w, dtype=float) / 1e-3)


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to generate a topology; defaults follow the
    reference simulation setup."""

    seed: int = 0
    n_devices: int = 50
    bandwidth_hz: float = 20e6
    n0_dbm_per_hz: float = -174.0
    kappa: float = 1e-28
    r_local: int = 10
    r_global: int = 100
    s_min: float = 160.0
    s_max: float = 640.0
    s_standard: float = 160.0
    d_bits: float = 28100.0
    samples_per_device: int = 500
    cycles_min: float = 1e4
    cycles_max: float = 3e4
    p_min_dbm: float = 0.0
    p_max_dbm: float = 12.0
    f_min_hz: float = 0.0
    f_max_hz: float = 2e9
    area_radius_m: float = 250.0
    shadow_sigma_db: float = 8.0

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if self.area_radius_m <= 0:
            raise ValueError("area_radius_m must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")
        if not self.cycles_min <= self.cycles_max:
            raise ValueError("need cycles_min <= cycles_max")


def system_config(spec: ScenarioSpec) -> SystemConfig:
    return SystemConfig(
        n_devices=spec.n_devices,
        total_bandwidth=spec.bandwidth_hz,
        noise_density=float(dbm_to_watts(spec.n0_dbm_per_hz)),
        kappa=spec.kappa,
        r_local=spec.r_local,
        r_global=spec.r_global,
        s_min=spec.s_min,
        s_max=spec.s_max,
        s_standard=spec.s_standard,
    )


def pathloss_db(distance_km, shadow_db=0.0):
    return PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * np.log10(distance_km) + shadow_db


def gen_topology(
    spec: ScenarioSpec, seed: int | None = None
) -> tuple[SystemConfig, list[DeviceProfile]]:
    """Build (config, devices) deterministically from the seed.

    Draw order is part of the contract (distances, then shadows, then cycle
    counts) so that seeds stay comparable across versions.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n = spec.n_devices

    # Uniform by area on the disk: radius scales with sqrt of a uniform draw.
    dist_m = np.maximum(spec.area_radius_m * np.sqrt(rng.uniform(size=n)), MIN_DISTANCE_M)
    shadow = rng.normal(0.0, spec.shadow_sigma_db, size=n)
    cycles = rng.uniform(spec.cycles_min, spec.cycles_max, size=n)

    gain = 10.0 ** (-pathloss_db(dist_m / 1000.0, shadow) / 10.0)
    p_min = float(dbm_to_watts(spec.p_min_dbm))
    p_max = float(dbm_to_watts(spec.p_max_dbm))

    devices = [
        DeviceProfile(
            gain=float(gain[i]),
            cycles_per_std_sample=float(cycles[i]),
            n_samples=spec.samples_per_device,
            upload_bits=spec.d_bits,
            p_min=p_min,
            p_max=p_max,
            f_min=spec.f_min_hz,
            f_max=spec.f_max_hz,
        )
        for i in range(n)
    ]
    return system_config(spec), devices


def demanding_floor_instance(
    seed: int, n_devices: int = 5, spec: ScenarioSpec | None = None
):
    """Instance whose rate floors all bind with interior powers at the optimum.

    Floors are set to the rates achieved at a sub-maximal power profile over
    a near-full bandwidth split, so meeting them consumes the whole budget
    (every floor multiplier positive) while leaving power headroom (no box
    active). Shares are drawn within a factor of three of each other so no
    device's floor goes slack. Returns (cfg, devices, floors, p0, b0) with a
    feasible full-power start.
    """
    spec = replace(spec or ScenarioSpec(), n_devices=n_devices)
    cfg, devices = gen_topology(spec, seed)
    rng = np.random.default_rng([seed, 61409])

    p_max = np.array([d.p_max for d in devices])
    gain = np.array([d.gain for d in devices])
    p_target = rng.uniform(0.3, 0.8, size=n_devices) * p_max
    raw = rng.uniform(0.5, 1.5, size=n_devices)
    b_target = raw / np.sum(raw) * 0.9 * cfg.total_bandwidth

    floors = rate_core(gain, p_target, b_target, cfg.noise_density)
    return cfg, devices, floors, p_max.copy(), b_target
