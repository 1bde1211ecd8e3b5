"""Reactive safety-filtered longitudinal controller.

Each step the vehicle tracks the feedback law ``alpha * (v_d - v)`` and clamps it into
``[u_lower, u_upper]``, where the bounds come from first-order barrier conditions on
crossing deadlines, the rear-end stopping distance and the actuator limit. When the bounds
cross, the vehicle drops its departure deadline and asks the intersection for a new window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, NamedTuple, Optional, Sequence, Tuple

from . import kernels
from .core import (
    ControlBounds,
    ControllerMode,
    CrossingWindow,
    PrecedingSignal,
    VehicleParams,
    VehicleState,
)
from .trajectories import feedback_law

# speed below which a vehicle counts as stopped (m/s)
V_STOP = 1e-3


class RearEndViolation(RuntimeError):
    """The standstill gap to the preceding vehicle is already breached."""


class InfeasibleControl(RuntimeError):
    """Lower and upper control bounds cross; ``bounds`` keeps both values."""

    def __init__(self, bounds: ControlBounds):
        super().__init__(f"infeasible control bounds: lower {bounds.u_lower:.6g} > upper {bounds.u_upper:.6g}")
        self.bounds = bounds


@dataclass(frozen=True)
class ConstraintContext:
    dp: float
    dt1: float
    dt2: float
    preceding: PrecedingSignal = PrecedingSignal()

    @classmethod
    def from_window(cls, state: VehicleState, window: CrossingWindow, t: float,
                    preceding: PrecedingSignal = PrecedingSignal()) -> "ConstraintContext":
        return cls(window.p_node - state.p, window.t_lo - t, window.t_hi - t, preceding)


@dataclass(frozen=True)
class ScheduleRequest:
    """Outgoing request for a new crossing window at ``node_id``."""

    node_id: Hashable
    reason: str


class ControlDecision(NamedTuple):
    u: float
    mode: ControllerMode
    bounds: ControlBounds
    request: Optional[ScheduleRequest] = None


def kinematic_deadline_speeds(dp: float, dt: float, u_max: float) -> Tuple[float, float]:
    """Speed thresholds ``(latest departure, earliest arrival)`` for covering ``dp`` in ``dt``.

    Moving faster than the first guarantees reaching ``dp`` within ``dt`` under full
    acceleration; moving slower than the second guarantees not reaching it before ``dt``
    under full braking.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    return dp / dt - 0.5 * u_max * dt, dp / dt + 0.5 * u_max * dt


def overshoot_horizon(dp: float, u_max: float) -> float:
    """Time to stop over distance ``dp`` braking at ``u_max``: ``sqrt(2 dp / u_max)``."""
    if dp < 0:
        raise ValueError(f"node already passed (dp={dp}); retire the window first")
    if not u_max > 0:
        raise ValueError("u_max must be > 0")
    return math.sqrt(2.0 * dp / u_max)


def crossing_upper_bound(v: float, ctx: ConstraintContext, params: VehicleParams) -> Optional[float]:
    """Earliest-arrival bound on u, or ``None`` once the window has opened."""
    if ctx.dt1 <= 0:
        return None
    return kernels.crossing_upper(v, ctx.dp, ctx.dt1, params.u_max, params.kappa_T, V_STOP)


def crossing_lower_bound(v: float, ctx: ConstraintContext, params: VehicleParams) -> Optional[float]:
    """Latest-departure bound on u, or ``None`` once the window has closed."""
    if ctx.dt2 <= 0:
        return None
    return kernels.crossing_lower(v, ctx.dp, ctx.dt2, params.u_max, params.kappa_T)


def rear_end_upper_bound(state: VehicleState, sig: PrecedingSignal, params: VehicleParams) -> Optional[float]:
    if not sig.present:
        return None
    try:
        return kernels.rear_end_upper(state.p, state.v, sig.delta, sig.delta_dot,
                                      params.gamma, params.u_max, params.kappa_R)
    except ValueError as exc:
        raise RearEndViolation(str(exc)) from None


def active_windows(schedule: Sequence[CrossingWindow], p: float) -> tuple:
    """Windows whose node has not been passed; a node is passed once ``p > p_node``."""
    return tuple(w for w in schedule if w.p_node >= p)


def assemble_bounds(state: VehicleState, schedule: Sequence[CrossingWindow], sig: PrecedingSignal,
                    params: VehicleParams, t: float, *, include_departure: bool = True,
                    hold_dt: Optional[float] = None) -> ControlBounds:
    """Combine crossing, rear-end and actuator constraints into one interval.

    Arrival bounds apply for every window not yet open; the departure bound comes from the
    nearest window and only once it is open. ``schedule`` must be sorted by node position.
    With ``hold_dt`` the command is also kept from carrying the gap out of the stopping set
    when held constant for that long.
    """
    nodes = [(w.p_node, w.t_lo, w.t_hi) for w in schedule]
    try:
        lower, upper = kernels.assemble(state.p, state.v, t, params.u_max, params.kappa_T,
                                        params.kappa_R, params.gamma, sig.delta, sig.delta_dot,
                                        nodes, include_departure, V_STOP, hold_dt or 0.0)
    except ValueError as exc:
        raise RearEndViolation(str(exc)) from None
    return ControlBounds(lower, upper)


def clamp_control(u_ref: float, bounds: ControlBounds) -> float:
    """Closest admissible control to ``u_ref``; raises InfeasibleControl on crossed bounds."""
    if not bounds.feasible:
        raise InfeasibleControl(bounds)
    return kernels.clamp(u_ref, bounds.u_lower, bounds.u_upper)


# mode switching graph, plus the persistent safe-stop behaviour while waiting
_TRANSITIONS = {
    (ControllerMode.NOMINAL, "infeasible"): ControllerMode.AWAITING_SCHEDULE,
    (ControllerMode.AWAITING_SCHEDULE, "wait"): ControllerMode.SAFE_STOP,
    (ControllerMode.SAFE_STOP, "wait"): ControllerMode.SAFE_STOP,
    (ControllerMode.AWAITING_SCHEDULE, "window"): ControllerMode.NOMINAL,
    (ControllerMode.SAFE_STOP, "window"): ControllerMode.NOMINAL,
    (ControllerMode.NOMINAL, "window"): ControllerMode.NOMINAL,
}


def transition(mode: ControllerMode, event: str) -> ControllerMode:
    try:
        return _TRANSITIONS[(mode, event)]
    except KeyError:
        raise ValueError(f"no transition from {mode.value} on {event!r}") from None


def _safe_stop(state: VehicleState, relaxed: ControlBounds, params: VehicleParams) -> float:
    brake = -params.u_max if state.v > V_STOP else 0.0
    return max(-params.u_max, min(brake, relaxed.u_upper))


def controller_step(state: VehicleState, schedule: Sequence[CrossingWindow], sig: PrecedingSignal,
                    params: VehicleParams, mode: ControllerMode, t: float,
                    hold_dt: Optional[float] = None) -> ControlDecision:
    """One evaluation of the reactive controller; pure in its arguments.

    In ``NOMINAL`` the feedback law is clamped into the assembled bounds. If they cross, or
    the nearest window closed before the vehicle reached its node, the decision moves to
    ``AWAITING_SCHEDULE``, carries a :class:`ScheduleRequest`, and applies the feedback law
    clamped into the bounds without the departure constraint. While still waiting the
    vehicle brakes to a stop and holds (``SAFE_STOP``). Leaving the waiting modes is the
    caller's job once a window arrives (see :func:`transition`). ``hold_dt`` is the
    zero-order-hold period, passed on to :func:`assemble_bounds`.
    """
    # passed nodes are skipped inside the kernel, so the schedule goes in unfiltered
    windows = schedule
    if mode is ControllerMode.NOMINAL:
        bounds = assemble_bounds(state, windows, sig, params, t, hold_dt=hold_dt)
        nearest = None
        for w in windows:
            if w.p_node >= state.p:
                nearest = w
                break
        expired = nearest is not None and nearest.t_hi <= t
        if bounds.u_lower <= bounds.u_upper and not expired:
            u = kernels.clamp(feedback_law(state, params), bounds.u_lower, bounds.u_upper)
            return ControlDecision(u, ControllerMode.NOMINAL, bounds)
        relaxed = assemble_bounds(state, windows, sig, params, t, include_departure=False, hold_dt=hold_dt)
        u = kernels.clamp(feedback_law(state, params), relaxed.u_lower, relaxed.u_upper)
        node = nearest.node_id if nearest is not None else None
        reason = "window closed before arrival" if expired else "lower bound exceeds upper bound"
        return ControlDecision(u, transition(mode, "infeasible"), bounds, ScheduleRequest(node, reason))

    relaxed = assemble_bounds(state, windows, sig, params, t, include_departure=False, hold_dt=hold_dt)
    return ControlDecision(_safe_stop(state, relaxed, params), transition(mode, "wait"), relaxed)
