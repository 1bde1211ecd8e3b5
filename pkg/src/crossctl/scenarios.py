"""Ready-made scenarios: the two-lane crossing, a fixed 10-vehicle reference run, and a
seeded random generator for safety sweeps."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .core import REFERENCE_PARAMS, VehicleParams
from .simulator import PROPOSED, Lane, Scenario, VehicleSpec

NODE_ID = "X"
NODE_POSITION = 30.0
LANE_LENGTH = 60.0

# (lane, spawn time s, initial speed m/s); every vehicle enters at p = 0
REFERENCE_SPAWNS = (
    ("A", 0.0, 25.0),
    ("B", 0.3, 22.0),
    ("A", 1.6, 27.0),
    ("B", 2.2, 18.0),
    ("A", 3.1, 20.0),
    ("B", 3.9, 26.0),
    ("A", 4.8, 15.0),
    ("B", 5.6, 24.0),
    ("A", 6.5, 28.0),
    ("B", 7.3, 19.0),
)


def two_lane_lanes(length: float = LANE_LENGTH, node: float = NODE_POSITION):
    """Two straight lanes crossing at one conflict node."""
    return (Lane("A", length, {NODE_ID: node}), Lane("B", length, {NODE_ID: node}))


def reference_scenario(alpha: float = REFERENCE_PARAMS["alpha"], controller: str = PROPOSED,
                       dt: float = 0.01) -> Scenario:
    prm = VehicleParams(alpha=alpha)
    vehicles = tuple(
        VehicleSpec(i, lane, t, 0.0, v0, prm) for i, (lane, t, v0) in enumerate(REFERENCE_SPAWNS)
    )
    return Scenario(two_lane_lanes(), vehicles, dt=dt, t_end=20.0, controller=controller,
                    name="reference")


def random_scenario(seed: int, n_vehicles: Optional[int] = None, spawn_window: float = 10.0,
                    v_range=(10.0, 30.0), params: VehicleParams = VehicleParams(),
                    controller: str = PROPOSED, dt: float = 0.01) -> Scenario:
    """Two-lane scenario with uniform spawn times and uniform initial speeds.

    ``n_vehicles`` defaults to a draw from 4..12. The horizon leaves 20 s after the last spawn.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13)) if n_vehicles is None else n_vehicles
    times = np.round(rng.uniform(0.0, spawn_window, n), 2)
    lanes = rng.integers(0, 2, n)
    speeds = rng.uniform(v_range[0], v_range[1], n)
    order = np.lexsort((lanes, times))
    vehicles = []
    taken = set()
    for i, k in enumerate(order):
        lane = "AB"[int(lanes[k])]
        t = float(times[k])
        while (lane, t) in taken:
            t = round(t + dt, 10)
        taken.add((lane, t))
        vehicles.append(VehicleSpec(i, lane, t, 0.0, float(speeds[k]), params))
    t_end = float(max(v.t_spawn for v in vehicles)) + 20.0
    return Scenario(two_lane_lanes(), tuple(vehicles), dt=dt, t_end=t_end, controller=controller,
                    seed=seed, name=f"random-{seed}")
