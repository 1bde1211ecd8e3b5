"""Deterministic fixed-step closed-loop simulation of vehicles on crossing lanes.

Vehicles follow a double integrator with zero-order-hold control. Each step every active
vehicle queries its controller (the reactive controller, or its baseline plan), the world is
integrated exactly, and preceding-vehicle signals are rebuilt from the new same-lane order.
A brake command that would carry a vehicle through zero speed stops it inside the step.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Optional, Tuple

import numpy as np

from .controller import RearEndViolation, controller_step, transition
from .coordinator import (
    ConflictNode,
    Coordinator,
    Grant,
    SignalProgram,
    compute_earliest_feasible,
    next_green_window,
)
from .core import (
    NO_PRECEDING,
    ControllerMode,
    CrossingWindow,
    PrecedingSignal,
    VehicleParams,
    VehicleState,
)
from .kernels import BACKEND_NAME
from .trajectories import (
    PlannedTrajectory,
    PlanningError,
    baseline_earliest_arrival,
    baseline_solve,
    cost_Jalpha,
    cost_Ju,
)

PROPOSED = "proposed"
BASELINE = "baseline"
BASELINE_MODE = "Baseline"
BRAKING_POINT = "braking_point"
POSITION = "position"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Lane:
    lane_id: Hashable
    length: float
    nodes: Mapping[Hashable, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.length > 0:
            raise ScenarioError(f"lane {self.lane_id!r}: length must be > 0")
        for node_id, p in self.nodes.items():
            if not 0 <= p < self.length:
                raise ScenarioError(f"lane {self.lane_id!r}: node {node_id!r} at {p} lies outside the lane")


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: int
    lane: Hashable
    t_spawn: float
    p0: float
    v0: float
    params: VehicleParams = VehicleParams()


@dataclass(frozen=True)
class Scenario:
    lanes: Tuple[Lane, ...]
    vehicles: Tuple[VehicleSpec, ...]
    dt: float = 0.01
    t_end: float = 25.0
    controller: str = PROPOSED
    signal: Optional[SignalProgram] = None
    tau_sep: float = 0.5
    dwell: Optional[float] = None
    response_delay: float = 0.0
    seed: Optional[int] = None
    name: str = "scenario"
    # what a follower is told about its leader: the leader's braking point or its position
    rear_end_signal: str = BRAKING_POINT

    def __post_init__(self):
        if not self.dt > 0:
            raise ScenarioError("dt must be > 0")
        if not self.t_end > self.dt:
            raise ScenarioError("t_end must exceed dt")
        if self.controller not in (PROPOSED, BASELINE):
            raise ScenarioError(f"controller must be {PROPOSED!r} or {BASELINE!r}")
        if self.rear_end_signal not in (BRAKING_POINT, POSITION):
            raise ScenarioError(f"rear_end_signal must be {BRAKING_POINT!r} or {POSITION!r}")
        if self.response_delay < 0:
            raise ScenarioError("response_delay must be >= 0")
        lanes = {lane.lane_id: lane for lane in self.lanes}
        if len(lanes) != len(self.lanes):
            raise ScenarioError("duplicate lane ids")
        ids = [v.vehicle_id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate vehicle ids")
        seen = {}
        for v in self.vehicles:
            lane = lanes.get(v.lane)
            if lane is None:
                raise ScenarioError(f"vehicle {v.vehicle_id}: unknown lane {v.lane!r}")
            if not 0 <= v.p0 < lane.length:
                raise ScenarioError(f"vehicle {v.vehicle_id}: p0 outside lane")
            if v.v0 < 0 or not math.isfinite(v.v0):
                raise ScenarioError(f"vehicle {v.vehicle_id}: v0 must be finite and >= 0")
            key = (v.lane, v.t_spawn, v.p0)
            if key in seen:
                raise ScenarioError(f"vehicles {seen[key]} and {v.vehicle_id} spawn at the same place and time")
            seen[key] = v.vehicle_id
        if self.controller == BASELINE:
            for lane in self.lanes:
                if len(lane.nodes) > 1:
                    raise ScenarioError("the baseline planner handles one conflict node per lane")
        if self.signal is not None:
            for lane in self.lanes:
                if lane.lane_id not in self.signal.phases:
                    raise ScenarioError(f"signal program has no phase for lane {lane.lane_id!r}")

    def conflict_nodes(self) -> List[ConflictNode]:
        positions: Dict[Hashable, Dict[Hashable, float]] = {}
        for lane in self.lanes:
            for node_id, p in lane.nodes.items():
                positions.setdefault(node_id, {})[lane.lane_id] = p
        return [ConflictNode(n, pos) for n, pos in positions.items()]

    def lane(self, lane_id) -> Lane:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        raise KeyError(lane_id)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass
class VehicleLog:
    vehicle_id: int
    lane: Hashable
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    u: np.ndarray
    mode: List[str]
    u_lower: np.ndarray
    u_upper: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass
class AuditReport:
    min_gap: float
    rear_end_violations: int
    co_occupancy_violations: int
    crossings: Dict[Tuple[int, Hashable], float]
    compliance: Dict[int, bool]
    details: List[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return (self.rear_end_violations == 0 and self.co_occupancy_violations == 0
                and all(self.compliance.values()))


@dataclass
class ScenarioResult:
    scenario: Scenario
    logs: Dict[int, VehicleLog]
    J_u: Dict[int, float]
    J_alpha: Dict[int, float]
    J_u_mean: float
    J_alpha_mean: float
    compute_times: np.ndarray
    audit: AuditReport
    grants: list
    planning_failures: Dict[int, str]
    spawn_times: Dict[int, float]
    # baseline plans per vehicle in adoption order; empty for the proposed controller
    plans: Dict[int, list] = field(default_factory=dict)
    backend: str = BACKEND_NAME

    @property
    def compute_stats(self) -> Dict[str, float]:
        ct = self.compute_times
        if ct.size == 0:
            return {"count": 0, "min_s": math.nan, "mean_s": math.nan, "max_s": math.nan}
        return {"count": int(ct.size), "min_s": float(ct.min()), "mean_s": float(ct.mean()),
                "max_s": float(ct.max())}


def nominal_arrival(p: float, v: float, p_target: float, params: VehicleParams, t: float = 0.0,
                    horizon: float = 1e4) -> Optional[float]:
    """Arrival time at ``p_target`` under the unconstrained feedback law, or None if never reached."""
    dp = p_target - p
    if dp <= 0:
        return t
    a = params.alpha

    def travelled(s):
        return params.v_d * s + (v - params.v_d) * (-math.expm1(-a * s)) / a

    if travelled(horizon) < dp:
        return None
    lo, hi = 0.0, 1.0
    while travelled(hi) < dp:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if travelled(mid) < dp:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return t + hi


def _zoh_crossing(p: float, v: float, u: float, target: float, dt: float) -> float:
    """Time offset in ``[0, dt]`` at which ``p + v s + u s^2 / 2`` reaches ``target``."""
    dp = target - p
    if dp <= 0:
        return 0.0
    if abs(u) > 1e-12:
        disc = v * v + 2.0 * u * dp
        if disc >= 0:
            s = 2.0 * dp / (v + math.sqrt(disc)) if v + math.sqrt(disc) > 0 else math.inf
            if 0.0 <= s <= dt * (1 + 1e-9):
                return min(s, dt)
    if v > 0:
        s = dp / v
        if s <= dt:
            return s
    return dt


class _Vehicle:
    __slots__ = ("spec", "lane", "p", "v", "mode", "schedule", "active", "done", "t_spawn",
                 "rows", "plan", "plans", "leader", "pending", "crossed")

    def __init__(self, spec: VehicleSpec, lane: Lane):
        self.spec = spec
        self.lane = lane
        self.p = spec.p0
        self.v = spec.v0
        self.mode = ControllerMode.NOMINAL
        self.schedule: List[CrossingWindow] = []
        self.active = False
        self.done = False
        self.t_spawn = math.nan
        self.rows: List[tuple] = []
        self.plan: Optional[PlannedTrajectory] = None
        self.plans: List[PlannedTrajectory] = []
        self.leader: Optional[int] = None
        self.pending: List[Tuple[float, Hashable]] = []
        self.crossed: Dict[Hashable, float] = {}


class World:
    """Mutable simulation state; advance it with :meth:`step`."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.k = 0
        self.coordinator = Coordinator(scenario.conflict_nodes(), scenario.tau_sep, scenario.dwell)
        self.vehicles = [_Vehicle(s, scenario.lane(s.lane)) for s in scenario.vehicles]
        self.index = {veh.spec.vehicle_id: i for i, veh in enumerate(self.vehicles)}
        self.compute_times: List[float] = []
        self.planning_failures: Dict[int, str] = {}
        self.events: List[str] = []
        self.signal_grants: list = []
        self._deferred: set = set()

    @property
    def grants(self) -> list:
        if self.scenario.signal is not None:
            return list(self.signal_grants)
        return list(self.coordinator.grants)

    def _record_signal_window(self, vid, w: CrossingWindow, t: float) -> None:
        for i, g in enumerate(self.signal_grants):
            if g.vehicle_id == vid and g.node_id == w.node_id and not g.superseded:
                self.signal_grants[i] = Grant(g.vehicle_id, g.node_id, g.t_lo, g.t_hi, g.granted_at, True)
        self.signal_grants.append(Grant(vid, w.node_id, w.t_lo, w.t_hi, t))

    @property
    def t(self) -> float:
        return self.k * self.scenario.dt

    # ------------------------------------------------------------------ spawning

    def _lane_neighbours(self, veh: _Vehicle, p: float):
        ahead = behind = None
        for other in self.vehicles:
            if other is veh or not other.active or other.lane.lane_id != veh.lane.lane_id:
                continue
            if other.p > p and (ahead is None or other.p < ahead.p):
                ahead = other
            elif other.p <= p and (behind is None or other.p > behind.p):
                behind = other
        return ahead, behind

    def _follows_safely(self, follower: _Vehicle, p: float, v: float, lead: _Vehicle) -> bool:
        gamma, u_max = follower.spec.params.gamma, follower.spec.params.u_max
        if lead.p - p - gamma <= 0:
            return False
        sig = self._signal_from(lead)
        slack = sig.delta - p - gamma
        return slack > 0 and v - sig.delta_dot <= math.sqrt(2.0 * u_max * slack)

    def _can_enter(self, veh: _Vehicle) -> bool:
        """Insertion is allowed only inside the rear-end safe set on both sides."""
        ahead, behind = self._lane_neighbours(veh, veh.p)
        if ahead is not None and not self._follows_safely(veh, veh.p, veh.v, ahead):
            return False
        if behind is not None and (behind.p == veh.p or not self._follows_safely(behind, behind.p, behind.v, veh)):
            return False
        return True

    def _spawn(self, veh: _Vehicle, t: float) -> None:
        veh.active = True
        veh.t_spawn = t
        self.coordinator.register(veh.spec.vehicle_id, veh.lane.lane_id)
        self._refresh_leaders(replan=False)
        if self.scenario.controller == PROPOSED:
            self._initial_schedule(veh, t)
        else:
            self._plan(veh, t)
            self._refresh_leaders()

    def _leader_window(self, veh: _Vehicle, node_id) -> Optional[CrossingWindow]:
        if veh.leader is None:
            return None
        lead = self.vehicles[veh.leader]
        for w in lead.schedule:
            if w.node_id == node_id:
                return w
        return None

    def _initial_schedule(self, veh: _Vehicle, t: float) -> None:
        sc = self.scenario
        prm = veh.spec.params
        state = VehicleState(veh.p, veh.v)
        floor = t
        windows = []
        for node_id, p_node in sorted(veh.lane.nodes.items(), key=lambda kv: kv[1]):
            if p_node < veh.p:
                continue
            if sc.signal is not None:
                g = next_green_window(sc.signal, veh.lane.lane_id, floor)
                w = CrossingWindow(node_id, p_node, g.t_lo, g.t_hi)
                self._record_signal_window(veh.spec.vehicle_id, w, t)
                windows.append(w)
                floor = w.t_lo
                continue
            t_nom = nominal_arrival(veh.p, veh.v, p_node, prm, t)
            probe = CrossingWindow(node_id, p_node, t, t + 1.0)
            t_min = compute_earliest_feasible(state, probe, prm, t)
            t_nom = t_min if t_nom is None else max(t_nom, t_min)
            lead_w = self._leader_window(veh, node_id)
            if lead_w is not None:
                t_nom = max(t_nom, lead_w.t_lo)
            t_nom = max(t_nom, floor)
            w = self.coordinator.request_window(veh.spec.vehicle_id, node_id, t_nom, now=t)
            windows.append(w)
            floor = w.t_lo
        veh.schedule = windows

    def _plan(self, veh: _Vehicle, t: float) -> None:
        """(Re)plan a baseline vehicle from its current state; the plan time is recorded."""
        sc = self.scenario
        prm = veh.spec.params
        if not veh.lane.nodes:
            target, occupied = veh.lane.length, []
        else:
            (node_id, target), = veh.lane.nodes.items()
            if veh.p >= target:
                self._adopt(veh, PlannedTrajectory(t, baseline_solve(veh.p, veh.v, veh.p + max(veh.v, 1e-9), 1.0)))
                return
            occupied = []
            for other in self.vehicles:
                if other is veh or other.plan is None or node_id not in other.lane.nodes:
                    continue
                tc = other.crossed.get(node_id, self._planned_crossing(other, node_id))
                if tc is not None:
                    occupied.append((tc - sc.tau_sep, tc + sc.tau_sep))
        preceding = self.vehicles[veh.leader].plan if veh.leader is not None else None
        t0 = time.perf_counter()
        try:
            T = baseline_earliest_arrival(veh.p, veh.v, target, prm, occupied, preceding,
                                          t_start=t, p_exit=veh.lane.length)
        except PlanningError as exc:
            self.compute_times.append(time.perf_counter() - t0)
            self.planning_failures[veh.spec.vehicle_id] = str(exc)
            if veh.plan is None:
                # nothing to follow: keep cruising at the current speed
                self._adopt(veh, PlannedTrajectory(t, baseline_solve(veh.p, veh.v, veh.p + max(veh.v, 1e-9), 1.0)))
            return
        plan = PlannedTrajectory(t, baseline_solve(veh.p, veh.v, target, T))
        self.compute_times.append(time.perf_counter() - t0)
        self._adopt(veh, plan)

    @staticmethod
    def _adopt(veh: _Vehicle, plan: PlannedTrajectory) -> None:
        veh.plan = plan
        veh.plans.append(plan)

    def _planned_crossing(self, veh: _Vehicle, node_id) -> Optional[float]:
        p_node = veh.lane.nodes[node_id]
        plan = veh.plan
        if plan.profile.p0 + 1e-12 >= p_node:
            return None
        prof = plan.profile
        if abs(float(prof.position(prof.T)) - p_node) < 1e-9:
            return plan.arrival_time
        # node reached in the cruise segment or before T; bisect on the monotone position
        lo, hi = 0.0, prof.T
        vT = float(prof.velocity(prof.T))
        if float(prof.position(hi)) < p_node:
            if vT <= 0:
                return None
            return plan.t_start + prof.T + (p_node - float(prof.position(prof.T))) / vT
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if float(prof.position(mid)) < p_node:
                lo = mid
            else:
                hi = mid
        return plan.t_start + hi

    # ------------------------------------------------------------------ stepping

    def _refresh_leaders(self, replan: bool = True) -> None:
        """Rebuild same-lane leader links; baseline vehicles replan when a new leader appears."""
        by_lane: Dict[Hashable, List[int]] = {}
        for i, veh in enumerate(self.vehicles):
            if veh.active:
                by_lane.setdefault(veh.lane.lane_id, []).append(i)
        for idxs in by_lane.values():
            idxs.sort(key=lambda i: -self.vehicles[i].p)
            prev = None
            for i in idxs:
                veh = self.vehicles[i]
                old = veh.leader
                veh.leader = prev
                if (replan and self.scenario.controller == BASELINE and veh.plan is not None
                        and old != prev and prev is not None):
                    self._plan(veh, self.t)
                prev = i

    def _signal(self, veh: _Vehicle) -> PrecedingSignal:
        if veh.leader is None:
            return NO_PRECEDING
        return self._signal_from(self.vehicles[veh.leader])

    def _signal_from(self, lead: _Vehicle) -> PrecedingSignal:
        if self.scenario.rear_end_signal == POSITION:
            return PrecedingSignal(lead.p, lead.v)
        # the braking point only moves forward while the leader's deceleration stays within u_max
        return PrecedingSignal(lead.p + lead.v * lead.v / (2.0 * lead.spec.params.u_max), 0.0)

    def _renegotiate(self, veh: _Vehicle, node_id, t: float) -> None:
        sc = self.scenario
        prm = veh.spec.params
        vid = veh.spec.vehicle_id
        current = next((w for w in veh.schedule if w.node_id == node_id), None)
        if current is None:
            return
        state = VehicleState(veh.p, veh.v)
        if sc.signal is not None:
            g = next_green_window(sc.signal, veh.lane.lane_id, max(t, current.t_hi))
            new = CrossingWindow(node_id, current.p_node, g.t_lo, g.t_hi)
            self._record_signal_window(vid, new, t)
        else:
            t_nom = max(compute_earliest_feasible(state, current, prm, t), t)
            lead_w = self._leader_window(veh, node_id)
            if lead_w is not None and lead_w.p_node >= self.vehicles[veh.leader].p:
                t_nom = max(t_nom, lead_w.t_lo)
            new = self.coordinator.renegotiate(vid, node_id, t_nom, now=t)
        sched = [new if w.node_id == node_id else w for w in veh.schedule]
        # keep downstream windows ordered behind the new one
        for i, w in enumerate(sched):
            if w.p_node > new.p_node and w.t_lo < new.t_lo:
                if sc.signal is not None:
                    g = next_green_window(sc.signal, veh.lane.lane_id, new.t_lo)
                    sched[i] = CrossingWindow(w.node_id, w.p_node, g.t_lo, g.t_hi)
                    self._record_signal_window(vid, sched[i], t)
                else:
                    sched[i] = self.coordinator.renegotiate(vid, w.node_id, new.t_lo, now=t)
        veh.schedule = sorted(sched, key=lambda w: w.p_node)
        self.events.append(f"t={t:.2f} vehicle {vid} node {node_id!r} -> [{new.t_lo:.3f}, {new.t_hi:.3f}]")

    def step(self, dt: Optional[float] = None) -> "World":
        sc = self.scenario
        dt = sc.dt if dt is None else dt
        t = self.t
        prm_eps = 1e-12

        for veh in self.vehicles:
            if not veh.active and not veh.done and veh.spec.t_spawn <= t + prm_eps:
                if self._can_enter(veh):
                    self._spawn(veh, t)
                elif veh.spec.vehicle_id not in self._deferred:
                    self._deferred.add(veh.spec.vehicle_id)
                    self.events.append(f"deferred {veh.spec.vehicle_id} spawn at t={t:.2f}")

        # deliver delayed schedule responses
        for veh in self.vehicles:
            if veh.active and veh.pending:
                due = [r for r in veh.pending if r[0] <= t + prm_eps]
                if due:
                    veh.pending = [r for r in veh.pending if r[0] > t + prm_eps]
                    for _, node_id in due:
                        self._renegotiate(veh, node_id, t)
                    veh.mode = transition(veh.mode, "window")

        commands = []
        for veh in self.vehicles:
            if not veh.active:
                continue
            prm = veh.spec.params
            if sc.controller == BASELINE:
                s = t - veh.plan.t_start
                u = float(veh.plan.profile.control(s))
                commands.append(u)
                veh.rows.append((t, veh.p, veh.v, u, BASELINE_MODE, -prm.u_max, prm.u_max))
                continue
            state = VehicleState(veh.p, veh.v)
            sig = self._signal(veh)
            c0 = time.perf_counter()
            try:
                dec = controller_step(state, veh.schedule, sig, prm, veh.mode, t, dt)
            except RearEndViolation:
                self.compute_times.append(time.perf_counter() - c0)
                self.events.append(f"t={t:.2f} vehicle {veh.spec.vehicle_id} gap breached; emergency braking")
                u = -prm.u_max if veh.v > 0 else 0.0
                commands.append(u)
                veh.rows.append((t, veh.p, veh.v, u, ControllerMode.SAFE_STOP.value, -prm.u_max, -prm.u_max))
                continue
            self.compute_times.append(time.perf_counter() - c0)
            commands.append(dec.u)
            veh.rows.append((t, veh.p, veh.v, dec.u, dec.mode.value, dec.bounds.u_lower, dec.bounds.u_upper))
            veh.mode = dec.mode
            if dec.request is not None and dec.request.node_id is not None:
                if sc.response_delay > 0:
                    veh.pending.append((t + sc.response_delay, dec.request.node_id))
                else:
                    self._renegotiate(veh, dec.request.node_id, t)
                    veh.mode = transition(veh.mode, "window")

        t_next = (self.k + 1) * dt
        i = 0
        for veh in self.vehicles:
            if not veh.active:
                continue
            u = commands[i]
            i += 1
            p, v = veh.p, veh.v
            if sc.controller == BASELINE:
                s = t_next - veh.plan.t_start
                p_new = float(veh.plan.profile.position(s))
                v_new = float(veh.plan.profile.velocity(s))
            elif u < 0 and v >= 0 and v + u * dt < 0:
                p_new = p - v * v / (2.0 * u)
                v_new = 0.0
            else:
                p_new = p + v * dt + 0.5 * u * dt * dt
                v_new = v + u * dt
            for node_id, p_node in veh.lane.nodes.items():
                if node_id not in veh.crossed and p <= p_node < p_new:
                    veh.crossed[node_id] = t + _zoh_crossing(p, v, u, p_node, dt)
            veh.p, veh.v = p_new, v_new
            if veh.schedule and veh.schedule[0].p_node < p_new:
                veh.schedule = [w for w in veh.schedule if w.p_node >= p_new]
            if p_new >= veh.lane.length:
                veh.active = False
                veh.done = True
        self.k += 1
        self._refresh_leaders()
        return self


def step(world: World, dt: Optional[float] = None) -> World:
    return world.step(dt)


# ---------------------------------------------------------------------- results


def _to_log(veh: _Vehicle) -> VehicleLog:
    rows = veh.rows
    if rows:
        t, p, v, u, mode, lo, hi = zip(*rows)
    else:
        t = p = v = u = mode = lo = hi = ()
    arr = lambda x: np.asarray(x, dtype=float)
    return VehicleLog(veh.spec.vehicle_id, veh.lane.lane_id, arr(t), arr(p), arr(v), arr(u), list(mode), arr(lo), arr(hi))


def crossing_instants(log: VehicleLog, p_node: float) -> Optional[float]:
    """First instant the logged trajectory passes ``p_node``, solved exactly under ZOH."""
    p = log.p
    idx = np.flatnonzero((p[:-1] <= p_node) & (p[1:] > p_node))
    if idx.size == 0:
        return None
    k = int(idx[0])
    dt = log.t[k + 1] - log.t[k]
    return float(log.t[k] + _zoh_crossing(p[k], log.v[k], log.u[k], p_node, dt))


def audit_safety(logs: Mapping[int, VehicleLog], scenario: Scenario, grants=()) -> AuditReport:
    """Rear-end gaps, node co-occupancy and window compliance from completed logs."""
    dt = scenario.dt
    details: List[str] = []
    params = {v.vehicle_id: v.params for v in scenario.vehicles}

    # rear-end: consecutive same-lane gaps at every common sample
    min_gap = math.inf
    rear = 0
    for lane in scenario.lanes:
        members = [lg for lg in logs.values() if lg.lane == lane.lane_id and len(lg)]
        if len(members) < 2:
            continue
        n = scenario.n_steps + 1
        P = np.full((n, len(members)), np.nan)
        G = np.array([params[lg.vehicle_id].gamma for lg in members])
        for j, lg in enumerate(members):
            P[np.rint(lg.t / dt).astype(int), j] = lg.p
        order = np.argsort(np.where(np.isnan(P), np.inf, P), axis=1)
        Ps = np.take_along_axis(P, order, axis=1)
        gaps = Ps[:, 1:] - Ps[:, :-1]
        need = G[order[:, :-1]]
        ok = ~np.isnan(gaps)
        if ok.any():
            min_gap = min(min_gap, float(np.min(gaps[ok])))
            bad = ok & (gaps < need - 1e-6)
            if bad.any():
                pairs = set()
                for r, c in zip(*np.nonzero(bad)):
                    a, b = members[order[r, c]].vehicle_id, members[order[r, c + 1]].vehicle_id
                    pairs.add((min(a, b), max(a, b)))
                rear += len(pairs)
                details.append(f"rear-end gap below standstill distance for pairs {sorted(pairs)}")

    # crossing instants per node
    crossings: Dict[Tuple[int, Hashable], float] = {}
    for lg in logs.values():
        lane = scenario.lane(lg.lane)
        for node_id, p_node in lane.nodes.items():
            if len(lg) >= 2:
                tc = crossing_instants(lg, p_node)
                if tc is not None:
                    crossings[(lg.vehicle_id, node_id)] = tc

    co = 0
    lane_of = {lg.vehicle_id: lg.lane for lg in logs.values()}
    by_node: Dict[Hashable, List[Tuple[float, int]]] = {}
    for (vid, node_id), tc in crossings.items():
        by_node.setdefault(node_id, []).append((tc, vid))
    for node_id, items in by_node.items():
        items.sort()
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                if items[j][0] - items[i][0] >= scenario.tau_sep:
                    break
                a, b = items[i][1], items[j][1]
                if scenario.signal is not None and lane_of[a] == lane_of[b]:
                    continue
                co += 1
                details.append(f"node {node_id!r}: vehicles {a} and {b} cross {items[j][0] - items[i][0]:.4f} s apart")

    final: Dict[Tuple[int, Hashable], Tuple[float, float]] = {}
    for g in grants:
        if not g.superseded:
            final[(g.vehicle_id, g.node_id)] = (g.t_lo, g.t_hi)
    compliance: Dict[int, bool] = {}
    for (vid, node_id), tc in crossings.items():
        win = final.get((vid, node_id))
        if win is None:
            continue
        ok = win[0] - dt <= tc <= win[1] + dt
        if not ok:
            details.append(f"vehicle {vid} crossed node {node_id!r} at {tc:.4f}, window [{win[0]:.4f}, {win[1]:.4f}]")
        compliance[vid] = compliance.get(vid, True) and ok
    return AuditReport(min_gap, rear, co, crossings, compliance, details)


def run(scenario: Scenario) -> ScenarioResult:
    """Simulate ``scenario`` to ``t_end`` and compute costs, timings and the safety audit."""
    world = World(scenario)
    for _ in range(scenario.n_steps):
        world.step()
    logs = {veh.spec.vehicle_id: _to_log(veh) for veh in world.vehicles if veh.rows}
    J_u, J_alpha = {}, {}
    for vid, lg in logs.items():
        if len(lg) >= 2:
            prm = world.vehicles[world.index[vid]].spec.params
            J_u[vid] = cost_Ju(lg.u, scenario.dt)
            J_alpha[vid] = cost_Jalpha(lg.v, lg.u, prm, scenario.dt)
    grants = world.grants
    audit = audit_safety(logs, scenario, grants)
    audit.details.extend(e for e in world.events if e.startswith("deferred") or "breached" in e)
    for vid, msg in world.planning_failures.items():
        audit.details.append(f"vehicle {vid}: baseline planning failed: {msg}")
    mean = lambda d: float(np.mean(list(d.values()))) if d else math.nan
    return ScenarioResult(
        scenario=scenario,
        logs=logs,
        J_u=J_u,
        J_alpha=J_alpha,
        J_u_mean=mean(J_u),
        J_alpha_mean=mean(J_alpha),
        compute_times=np.asarray(world.compute_times, dtype=float),
        audit=audit,
        grants=grants,
        planning_failures=dict(world.planning_failures),
        spawn_times={veh.spec.vehicle_id: veh.t_spawn for veh in world.vehicles},
        plans={veh.spec.vehicle_id: list(veh.plans) for veh in world.vehicles if veh.plans},
    )

