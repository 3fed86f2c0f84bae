"""Core system model: rates, energies, times, accuracy, and the scalar objective.

Everything downstream (both subproblem solvers, the alternating driver, the
benchmarks and the brute-force oracle) computes against the formulas in this
module. All quantities are SI internally (W, Hz, J, s, bits); dBm/GHz exist
only at the harness/CLI boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllocationInfeasible, ComputationInfeasible, TransmissionInfeasible

# Detection-accuracy curve A(s) = 1 - ACCURACY_SCALE * exp(-ACCURACY_DECAY * s),
# s in pixels (frame side length).
ACCURACY_SCALE = 1.578
ACCURACY_DECAY = 6.5e-3


@dataclass(frozen=True)
class SystemConfig:
    """Global constants shared by every device."""

    n_devices: int
    total_bandwidth: float  # Hz
    noise_density: float  # W/Hz
    kappa: float  # effective switched capacitance
    r_local: int  # local iterations per round
    r_global: int  # global rounds
    s_min: float  # pixels
    s_max: float  # pixels
    s_standard: float  # pixels; cycle costs are quoted per standard-resolution sample

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if self.total_bandwidth <= 0:
            raise ValueError("total_bandwidth must be positive")
        if self.noise_density <= 0:
            raise ValueError("noise_density must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.r_local < 1 or self.r_global < 1:
            raise ValueError("r_local and r_global must be >= 1")
        if not (0 < self.s_min <= self.s_standard):
            raise ValueError("need 0 < s_min <= s_standard")
        if not self.s_min < self.s_max:
            raise ValueError("need s_min < s_max")

    @property
    def zeta(self) -> float:
        """Resolution rescaling constant, exactly 1 / s_standard**2."""
        return 1.0 / self.s_standard**2


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device channel and workload constants plus decision boxes."""

    gain: float  # linear channel power gain
    cycles_per_std_sample: float  # CPU cycles per standard-resolution sample
    n_samples: int
    upload_bits: float
    p_min: float  # W
    p_max: float  # W
    f_min: float  # Hz
    f_max: float  # Hz

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be positive")
        if self.cycles_per_std_sample <= 0:
            raise ValueError("cycles_per_std_sample must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.upload_bits <= 0:
            raise ValueError("upload_bits must be positive")
        if not (0 <= self.p_min <= self.p_max) or self.p_max == 0:
            raise ValueError("need 0 <= p_min <= p_max with p_max > 0")
        if not (0 <= self.f_min < self.f_max):
            raise ValueError("need 0 <= f_min < f_max")


@dataclass(frozen=True)
class Weights:
    """Objective weights; energy/time weights are normalized to sum to one."""

    w1: float
    w2: float
    rho: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.rho < 0:
            raise ValueError("weights must be non-negative")
        if abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError(
                "w1 + w2 must equal 1; use normalize_weights() for raw weights"
            )


def normalize_weights(w1: float, w2: float, rho: float) -> Weights:
    """Scale (w1, w2, rho) by 1/(w1+w2) so the cost weights sum to one.

    Rejects w1 == w2 == 0: that degenerates to maximizing accuracy alone,
    which needs no resource optimization.
    """
    if w1 < 0 or w2 < 0 or rho < 0:
        raise ValueError("weights must be non-negative")
    total = w1 + w2
    if total == 0:
        raise ValueError("w1 + w2 must be positive (pure accuracy maximization is trivial)")
    return Weights(w1 / total, w2 / total, rho / total)


@dataclass
class Allocation:
    """Per-device decision vector plus the auxiliary per-round deadline."""

    power: np.ndarray  # W
    bandwidth: np.ndarray  # Hz
    freq: np.ndarray  # Hz
    resolution: np.ndarray  # pixels, each in {s_min, s_max}
    deadline: float  # s, per-round completion-time bound T

    def copy(self) -> "Allocation":
        return Allocation(
            self.power.copy(),
            self.bandwidth.copy(),
            self.freq.copy(),
            self.resolution.copy(),
            self.deadline,
        )


@dataclass(frozen=True)
class CostBreakdown:
    """Evaluated cost of an allocation.

    ``total_energy`` is r_global * (e_trans + e_cmp) with the per-round sums
    over devices; ``total_time`` is the realized r_global * max(T_cmp + T_up);
    ``objective`` prices time through the stored deadline (the optimization
    variable), with the realized per-round maximum exposed as ``t_eff``.
    """

    e_trans: float  # J, one round, summed over devices
    e_cmp: float  # J, one round, summed over devices
    total_energy: float  # J
    total_time: float  # s
    accuracy_sum: float
    objective: float
    t_eff: float  # s, realized per-round makespan
    deadline: float  # s, stored auxiliary T


@dataclass(frozen=True)
class DeviceArrays:
    """Column view of a device list for vectorized solvers."""

    gain: np.ndarray
    cycles: np.ndarray
    samples: np.ndarray
    bits: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    f_min: np.ndarray
    f_max: np.ndarray

    @property
    def work(self) -> np.ndarray:
        """cycles * samples, the per-standard-frame workload product."""
        return self.cycles * self.samples


def device_arrays(devices: list[DeviceProfile]) -> DeviceArrays:
    return DeviceArrays(
        gain=np.array([d.gain for d in devices], dtype=float),
        cycles=np.array([d.cycles_per_std_sample for d in devices], dtype=float),
        samples=np.array([d.n_samples for d in devices], dtype=float),
        bits=np.array([d.upload_bits for d in devices], dtype=float),
        p_min=np.array([d.p_min for d in devices], dtype=float),
        p_max=np.array([d.p_max for d in devices], dtype=float),
        f_min=np.array([d.f_min for d in devices], dtype=float),
        f_max=np.array([d.f_max for d in devices], dtype=float),
    )


def rate_core(gain, power, bandwidth, noise_density):
    """Shannon-capacity uplink rate; vectorized, with the bw->0 limit of 0."""
    g = np.asarray(gain, dtype=float)
    p = np.asarray(power, dtype=float)
    bw = np.asarray(bandwidth, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = g * p / (noise_density * bw)
        r = bw * np.log2(1.0 + snr)
    out = np.where(bw > 0, r, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def rate_hessian(gain, power, bandwidth, noise_density):
    """Second derivatives (h_pp, h_pb, h_bb) of the rate in (power, bandwidth).

    The quadratic form collapses to -g^2 (dp*B - db*p)^2 / (ln2 N0^2 B^3 (1+snr)^2),
    which is why the rate is jointly concave on the positive orthant.
    """
    g = np.asarray(gain, dtype=float)
    p = np.asarray(power, dtype=float)
    bw = np.asarray(bandwidth, dtype=float)
    snr = g * p / (noise_density * bw)
    ln2 = np.log(2.0)
    common = 1.0 / (ln2 * bw * (1.0 + snr) ** 2)
    h_pp = -(g / noise_density) ** 2 * common
    h_pb = (g / noise_density) * snr * common
    h_bb = -(snr**2) * common
    return h_pp, h_pb, h_bb


def data_rate(cfg: SystemConfig, dev: DeviceProfile, power, bandwidth):
    """Uplink rate in bits/s for one device (degenerate bw=0 gives rate 0)."""
    return rate_core(dev.gain, power, bandwidth, cfg.noise_density)


def uplink_time(cfg: SystemConfig, dev: DeviceProfile, power, bandwidth) -> float:
    """Seconds to push the device's update through its uplink."""
    if dev.upload_bits == 0:
        return 0.0
    r = data_rate(cfg, dev, power, bandwidth)
    if r <= 0:
        raise TransmissionInfeasible(
            f"zero data rate (p={power}, bw={bandwidth}): upload never completes"
        )
    return dev.upload_bits / r


def trans_energy(cfg: SystemConfig, dev: DeviceProfile, power, bandwidth) -> float:
    """Transmission energy for one upload: power * uplink time."""
    if power == 0:
        return 0.0
    return power * uplink_time(cfg, dev, power, bandwidth)


def comp_energy(cfg: SystemConfig, dev: DeviceProfile, freq, s) -> float:
    """Local-training energy for one round (all r_local passes)."""
    work = cfg.zeta * s**2 * dev.cycles_per_std_sample * dev.n_samples
    return cfg.kappa * cfg.r_local * work * freq**2


def comp_time(cfg: SystemConfig, dev: DeviceProfile, freq, s) -> float:
    """Local-training wall time for one round."""
    if freq <= 0:
        raise ComputationInfeasible(f"CPU frequency {freq} Hz: training never completes")
    work = cfg.zeta * s**2 * dev.cycles_per_std_sample * dev.n_samples
    return cfg.r_local * work / freq


def accuracy(s) -> float:
    """Detection accuracy attained at frame resolution s (pixels)."""
    return 1.0 - ACCURACY_SCALE * np.exp(-ACCURACY_DECAY * np.asarray(s, dtype=float))


def per_device_times(cfg: SystemConfig, arrays: DeviceArrays, alloc: Allocation):
    """(T_cmp, T_up) vectors; inf where a device cannot finish."""
    rates = rate_core(arrays.gain, alloc.power, alloc.bandwidth, cfg.noise_density)
    with np.errstate(divide="ignore"):
        t_up = np.where(rates > 0, arrays.bits / np.where(rates > 0, rates, 1.0), np.inf)
        work = cfg.zeta * alloc.resolution**2 * arrays.work
        t_cmp = np.where(
            alloc.freq > 0, cfg.r_local * work / np.where(alloc.freq > 0, alloc.freq, 1.0), np.inf
        )
    return t_cmp, t_up


def feasibility_violations(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    alloc: Allocation,
    tol: float = 1e-9,
) -> list[str]:
    """List every constraint the allocation breaks (empty list = feasible).

    ``tol`` is a relative slack absorbing float dust on box edges, the
    bandwidth budget, and the deadline; the checks are otherwise exact.
    """
    arrays = device_arrays(devices)
    bad: list[str] = []

    def over(x, bound):
        return x > bound + tol * max(1.0, abs(bound))

    def under(x, bound):
        return x < bound - tol * max(1.0, abs(bound))

    for n in range(len(devices)):
        if under(alloc.power[n], arrays.p_min[n]) or over(alloc.power[n], arrays.p_max[n]):
            bad.append(f"device {n}: power {alloc.power[n]} outside "
                       f"[{arrays.p_min[n]}, {arrays.p_max[n]}]")
        if under(alloc.freq[n], arrays.f_min[n]) or over(alloc.freq[n], arrays.f_max[n]):
            bad.append(f"device {n}: freq {alloc.freq[n]} outside "
                       f"[{arrays.f_min[n]}, {arrays.f_max[n]}]")
        if alloc.bandwidth[n] < -tol * cfg.total_bandwidth:
            bad.append(f"device {n}: negative bandwidth {alloc.bandwidth[n]}")
        s = alloc.resolution[n]
        if not (abs(s - cfg.s_min) <= tol * cfg.s_min or abs(s - cfg.s_max) <= tol * cfg.s_max):
            bad.append(f"device {n}: resolution {s} not in {{{cfg.s_min}, {cfg.s_max}}}")

    if over(float(np.sum(alloc.bandwidth)), cfg.total_bandwidth):
        bad.append(f"bandwidth sum {np.sum(alloc.bandwidth)} exceeds budget {cfg.total_bandwidth}")

    t_cmp, t_up = per_device_times(cfg, arrays, alloc)
    slowest = float(np.max(t_cmp + t_up))
    if not np.isfinite(slowest):
        n = int(np.argmax(t_cmp + t_up))
        bad.append(f"device {n}: cannot finish a round (zero rate or zero frequency)")
    elif over(slowest, alloc.deadline):
        bad.append(f"deadline {alloc.deadline} s < realized per-round makespan {slowest} s")
    return bad


def evaluate(
    cfg: SystemConfig,
    devices: list[DeviceProfile],
    weights: Weights,
    alloc: Allocation,
) -> CostBreakdown:
    """Cost breakdown and scalar objective of a feasible allocation.

    Raises AllocationInfeasible (listing the violated constraints) rather
    than pricing an infeasible point.
    """
    bad = feasibility_violations(cfg, devices, alloc)
    if bad:
        raise AllocationInfeasible(bad)

    arrays = device_arrays(devices)
    t_cmp, t_up = per_device_times(cfg, arrays, alloc)
    e_trans = float(np.sum(alloc.power * t_up))
    work = cfg.zeta * alloc.resolution**2 * arrays.work
    e_cmp = float(np.sum(cfg.kappa * cfg.r_local * work * alloc.freq**2))
    t_eff = float(np.max(t_cmp + t_up))

    total_energy = cfg.r_global * (e_trans + e_cmp)
    total_time = cfg.r_global * t_eff
    acc = float(np.sum(accuracy(alloc.resolution)))
    objective = (
        weights.w1 * total_energy
        + weights.w2 * cfg.r_global * alloc.deadline
        - weights.rho * acc
    )
    return CostBreakdown(
        e_trans=e_trans,
        e_cmp=e_cmp,
        total_energy=total_energy,
        total_time=total_time,
        accuracy_sum=acc,
        objective=objective,
        t_eff=t_eff,
        deadline=alloc.deadline,
    )
