"""Shared fixtures: the 50-instance link-solver batch and small scenarios.

The 50 seeded N=5 instances are solved once per session; the multiplier
fixed-point, contraction, KKT-residual, and driver-convergence checks all
read from the same batch so the suite stays fast and the checks see the
same solves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

from fedalloc import (
    ScenarioSpec,
    Weights,
    gen_topology,
    solve_link,
)
from fedalloc.topology import demanding_floor_instance

N_INSTANCES = 50
INSTANCE_WEIGHTS = Weights(0.5, 0.5, 1.0)


@dataclass(frozen=True)
class LinkInstance:
    seed: int
    cfg: object
    devices: list
    floors: np.ndarray
    p0: np.ndarray
    b0: np.ndarray
    state: object  # solved LinkState


@pytest.fixture(scope="session")
def link_batch():
    """50 seeded N=5 floor-binding instances, each solved once, plus wall time."""
    instances = []
    elapsed = 0.0
    for seed in range(N_INSTANCES):
        cfg, devices, floors, p0, b0 = demanding_floor_instance(seed)
        t0 = time.perf_counter()
        state = solve_link(cfg, devices, INSTANCE_WEIGHTS, floors, p0, b0)
        elapsed += time.perf_counter() - t0
        instances.append(LinkInstance(seed, cfg, devices, floors, p0, b0, state))
    return {"instances": instances, "solve_seconds": elapsed, "weights": INSTANCE_WEIGHTS}


@pytest.fixture(scope="session")
def two_device_scenario():
    """Small deterministic topology for oracle-backed checks."""
    return gen_topology(ScenarioSpec(seed=0, n_devices=2))


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} criterion={criterion} {detail}")
