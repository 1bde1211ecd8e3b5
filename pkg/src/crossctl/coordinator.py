"""Scheduled-intersection authority.

For unsignalized operation a :class:`Coordinator` keeps a first-come-first-served ledger of
crossing reservations per conflict node; same-node reservations stay disjoint after padding
by ``tau_sep``. For signalized operation :func:`next_green_window` turns a fixed-time signal
program into crossing windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional

from .core import CrossingWindow, ParameterError, VehicleParams, VehicleState


class SchedulingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConflictNode:
    node_id: Hashable
    positions: Dict[Hashable, float]

    def __post_init__(self):
        if not self.positions:
            raise ParameterError("positions", f"node {self.node_id!r} lies on no lane")
        for lane, p in self.positions.items():
            if not math.isfinite(p):
                raise ParameterError("positions", f"lane {lane!r}: position must be finite")


@dataclass(frozen=True)
class Reservation:
    vehicle_id: Hashable
    t_lo: float
    t_hi: float


@dataclass(frozen=True)
class Grant:
    """One row of the window log."""

    vehicle_id: Hashable
    node_id: Hashable
    t_lo: float
    t_hi: float
    granted_at: float
    superseded: bool = False


@dataclass
class OccupancyLedger:
    reservations: Dict[Hashable, List[Reservation]] = field(default_factory=dict)

    def on(self, node_id) -> List[Reservation]:
        return self.reservations.setdefault(node_id, [])

    def held_by(self, vehicle_id, node_id) -> Optional[Reservation]:
        for r in self.reservations.get(node_id, ()):
            if r.vehicle_id == vehicle_id:
                return r
        return None


def earliest_slot(reservations, t_nominal: float, dwell: float, tau_sep: float) -> float:
    """Smallest start ``>= t_nominal`` of a ``dwell``-long slot clear of ``reservations`` by ``tau_sep``."""
    def clear(start):
        end = start + dwell
        return all(end + tau_sep <= r.t_lo or start >= r.t_hi + tau_sep for r in reservations)

    candidates = sorted({t_nominal} | {r.t_hi + tau_sep for r in reservations if r.t_hi + tau_sep > t_nominal})
    for c in candidates:
        if clear(c):
            return c
    raise AssertionError("unreachable: the slot after the last reservation is always clear")


class Coordinator:
    """FCFS reservation database for the conflict nodes of one intersection."""

    def __init__(self, nodes, tau_sep: float = 0.5, dwell: Optional[float] = None):
        if not tau_sep >= 0:
            raise ValueError("tau_sep must be >= 0")
        self.nodes = {n.node_id: n for n in nodes}
        self.tau_sep = tau_sep
        self.dwell = 2.0 * tau_sep if dwell is None else dwell
        if not self.dwell > 0:
            raise ValueError("dwell must be > 0")
        self.ledger = OccupancyLedger()
        self.grants: List[Grant] = []
        self._lanes: Dict[Hashable, Hashable] = {}

    def register(self, vehicle_id, lane) -> None:
        self._lanes[vehicle_id] = lane

    def _position(self, vehicle_id, node_id) -> float:
        node = self.nodes.get(node_id)
        if node is None:
            raise SchedulingError(f"unknown node {node_id!r}")
        lane = self._lanes.get(vehicle_id)
        if lane is None:
            if len(node.positions) != 1:
                raise SchedulingError(f"vehicle {vehicle_id!r} has no registered lane")
            (p,) = node.positions.values()
            return p
        if lane not in node.positions:
            raise SchedulingError(f"node {node_id!r} is not on lane {lane!r}")
        return node.positions[lane]

    def request_window(self, vehicle_id, node_id, t_nominal: float, dwell: Optional[float] = None,
                       *, now: float = -math.inf) -> CrossingWindow:
        """Grant the earliest clear window starting no earlier than ``t_nominal``."""
        if t_nominal < now:
            raise SchedulingError(f"requested time {t_nominal} is in the past (now {now})")
        if self.ledger.held_by(vehicle_id, node_id) is not None:
            raise SchedulingError(f"vehicle {vehicle_id!r} already holds node {node_id!r}; renegotiate instead")
        p_node = self._position(vehicle_id, node_id)
        dwell = self.dwell if dwell is None else dwell
        booked = self.ledger.on(node_id)
        t_lo = earliest_slot(booked, t_nominal, dwell, self.tau_sep)
        booked.append(Reservation(vehicle_id, t_lo, t_lo + dwell))
        booked.sort(key=lambda r: r.t_lo)
        granted_at = now if math.isfinite(now) else t_nominal
        self.grants.append(Grant(vehicle_id, node_id, t_lo, t_lo + dwell, granted_at))
        return CrossingWindow(node_id, p_node, t_lo, t_lo + dwell)

    def release(self, vehicle_id, node_id) -> Reservation:
        held = self.ledger.held_by(vehicle_id, node_id)
        if held is None:
            raise SchedulingError(f"vehicle {vehicle_id!r} holds no reservation on node {node_id!r}")
        self.ledger.on(node_id).remove(held)
        for i in range(len(self.grants) - 1, -1, -1):
            g = self.grants[i]
            if g.vehicle_id == vehicle_id and g.node_id == node_id and not g.superseded:
                self.grants[i] = Grant(g.vehicle_id, g.node_id, g.t_lo, g.t_hi, g.granted_at, True)
                break
        return held

    def renegotiate(self, vehicle_id, node_id, t_earliest_feasible: float, dwell: Optional[float] = None,
                    *, now: float = -math.inf) -> CrossingWindow:
        """Release the vehicle's reservation on ``node_id`` and grant a new one."""
        if t_earliest_feasible < now:
            raise SchedulingError(f"requested time {t_earliest_feasible} is in the past (now {now})")
        self.release(vehicle_id, node_id)
        return self.request_window(vehicle_id, node_id, t_earliest_feasible, dwell, now=now)


@dataclass(frozen=True)
class SignalPhase:
    """Fixed-time green phase of one approach, stopping at ``p_node`` on that approach."""

    cycle_s: float
    offset_s: float
    green_s: float
    node_id: Hashable = "stopline"
    p_node: float = 0.0

    def __post_init__(self):
        if not 0 < self.green_s < self.cycle_s:
            raise ParameterError("green_s", "need 0 < green duration < cycle length")


@dataclass(frozen=True)
class SignalProgram:
    phases: Dict[Hashable, SignalPhase]


def next_green_window(program: SignalProgram, approach, t: float) -> CrossingWindow:
    """Current green remainder if ``t`` is inside a green, else the next full green."""
    ph = program.phases[approach]
    k = math.floor((t - ph.offset_s) / ph.cycle_s)
    g_lo = ph.offset_s + k * ph.cycle_s
    g_hi = g_lo + ph.green_s
    if g_hi > t:
        return CrossingWindow(ph.node_id, ph.p_node, max(g_lo, t), g_hi)
    return CrossingWindow(ph.node_id, ph.p_node, g_lo + ph.cycle_s, g_hi + ph.cycle_s)


def compute_earliest_feasible(state: VehicleState, window: CrossingWindow, params: VehicleParams,
                              t: float = 0.0) -> float:
    """Earliest absolute arrival time at the window's node under ``|u| <= u_max``.

    With free terminal speed the time-optimal manoeuvre is a single full-acceleration arc.
    """
    dp = window.p_node - state.p
    if dp <= 0:
        return t
    # root of dp = v s + u_max s^2 / 2, in the cancellation-free form
    return t + 2.0 * dp / (state.v + math.sqrt(state.v * state.v + 2.0 * params.u_max * dp))
