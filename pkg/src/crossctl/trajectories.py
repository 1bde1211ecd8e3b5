"""Analytic trajectories: the exponential optimal primitive, its feedback limit, and the
linear-acceleration baseline planner with its energy costs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .core import VehicleParams, VehicleState


class PlanningError(RuntimeError):
    """No admissible baseline arrival time exists below the search cap."""


@dataclass(frozen=True)
class PrimitiveCoefficients:
    c1: float
    c2: float
    c3: float
    c4: float
    alpha: float

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


def primitive_eval(coeffs: PrimitiveCoefficients, t):
    """Position, speed and acceleration of the unconstrained optimal primitive at time ``t``.

    Works on scalars or numpy arrays.
    """
    a = coeffs.alpha
    grow = coeffs.c1 * np.exp(a * t)
    decay = coeffs.c2 * np.exp(-a * t)
    p = grow + decay + coeffs.c3 * t + coeffs.c4
    v = a * (grow - decay) + coeffs.c3
    u = a * a * (grow + decay)
    return p, v, u


def feedback_law(state: VehicleState, params: VehicleParams) -> float:
    """Unsaturated infinite-horizon optimal control ``alpha * (v_d - v)``."""
    return params.alpha * (params.v_d - state.v)


@dataclass(frozen=True)
class LinearProfile:
    """Control ``u(t) = a t + b`` on ``[0, T]`` from ``(p0, v0)``, cruising afterwards."""

    a: float
    b: float
    T: float
    p0: float
    v0: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        for name in ("a", "b", "T", "p0", "v0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def control(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.T, self.a * t + self.b, 0.0)

    def velocity(self, t):
        tc = np.minimum(np.asarray(t, dtype=float), self.T)
        return self.v0 + self.b * tc + 0.5 * self.a * tc * tc

    def position(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.minimum(t, self.T)
        p = self.p0 + self.v0 * tc + 0.5 * self.b * tc**2 + self.a * tc**3 / 6.0
        return p + self.velocity(self.T) * np.maximum(t - self.T, 0.0)


@dataclass(frozen=True)
class PlannedTrajectory:
    """A baseline plan anchored at absolute start time ``t_start``."""

    t_start: float
    profile: LinearProfile

    def position(self, t):
        return self.profile.position(np.asarray(t, dtype=float) - self.t_start)

    @property
    def arrival_time(self) -> float:
        return self.t_start + self.profile.T


def baseline_solve(p0: float, v0: float, pf: float, T: float) -> LinearProfile:
    """Minimum-energy linear-acceleration profile reaching ``pf`` at ``T`` with ``u(T) = 0``."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    a = 3.0 * (v0 * T - (pf - p0)) / T**3
    return LinearProfile(a=a, b=-a * T, T=T, p0=p0, v0=v0)


def baseline_earliest_arrival(
    p0: float,
    v0: float,
    pf: float,
    params: VehicleParams,
    occupied: Sequence[Tuple[float, float]] = (),
    preceding: Optional[PlannedTrajectory] = None,
    *,
    t_start: float = 0.0,
    p_exit: Optional[float] = None,
    cap: float = 120.0,
    tol: float = 1e-4,
    sample_dt: float = 1e-3,
    scan_step: Optional[float] = None,
) -> float:
    """Smallest horizon ``T`` whose :func:`baseline_solve` profile is admissible.

    Admissible means ``|u| <= u_max`` and ``0 <= v <= max(v_d, v0)`` on ``[0, T]``, the absolute
    arrival time ``t_start + T`` lies outside every closed ``occupied`` interval, and the gap
    behind ``preceding`` stays ``>= gamma`` until this vehicle reaches ``p_exit`` (``pf`` when
    omitted). The feasible set is scanned in ``scan_step`` increments and the first feasible
    point is refined by bisection to ``tol``; the returned ``T`` is always feasible. The scan
    step defaults to ``sample_dt`` so no feasible gap wider than the sampling grid is skipped.
    """
    if scan_step is None:
        scan_step = sample_dt
    if not pf > p0:
        raise ValueError("pf must lie ahead of p0")
    v_cap = max(params.v_d, v0)
    exit_at = pf if p_exit is None else p_exit

    def feasible(T: float) -> bool:
        prof = baseline_solve(p0, v0, pf, T)
        arrival = t_start + T
        for lo, hi in occupied:
            if lo <= arrival <= hi:
                return False
        if not kernels.profile_ok(v0, prof.a, prof.b, T, params.u_max, v_cap, sample_dt):
            return False
        if preceding is None:
            return True
        vT = float(prof.velocity(T))
        if exit_at > pf and vT <= 0.0:
            return False
        t_stop = arrival + (min((exit_at - pf) / vT, cap) if exit_at > pf else 0.0)
        lead = preceding.profile
        gap = kernels.min_gap(
            p0, v0, prof.a, prof.b, T, t_start,
            lead.p0, lead.v0, lead.a, lead.b, lead.T, preceding.t_start,
            t_stop, exit_at, sample_dt,
        )
        return gap >= params.gamma

    # no profile can beat cruising at the speed cap
    T_prev = (pf - p0) / v_cap if v_cap > 0 else tol
    T_prev = max(T_prev - scan_step, tol)
    if feasible(T_prev):
        return T_prev
    # with u(T) = 0 the terminal speed is 3 d / (2 T) - v0 / 2, negative for every T > 3 d / v0
    limit = min(cap, 3.0 * (pf - p0) / v0) if v0 > 0 else cap
    T = T_prev
    while True:
        T = min(T + scan_step, limit)
        if feasible(T):
            break
        if T >= limit:
            raise PlanningError(f"no admissible arrival time below {limit:.6g} s (cap {cap} s)")
        T_prev = T
    lo, hi = T_prev, T
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _trapezoid(y: np.ndarray, dt: float) -> float:
    return float(dt * (np.sum(y) - 0.5 * (y[0] + y[-1])))


def cost_Ju(u_samples, dt: float) -> float:
    """Energy cost ``1/2 * integral(u^2)`` of a uniformly sampled control series."""
    u = np.asarray(u_samples, dtype=float)
    if u.size < 2:
        raise ValueError("need at least two samples")
    return 0.5 * _trapezoid(u * u, dt)


def cost_Jalpha(v_samples, u_samples, params: VehicleParams, dt: float) -> float:
    """Finite-horizon tracking cost ``1/2 * integral((v - v_d)^2 + u^2 / alpha^2)``."""
    v = np.asarray(v_samples, dtype=float)
    u = np.asarray(u_samples, dtype=float)
    if v.shape != u.shape:
        raise ValueError("v and u series must have equal length")
    if u.size < 2:
        raise ValueError("need at least two samples")
    running = (v - params.v_d) ** 2 + (u / params.alpha) ** 2
    return 0.5 * _trapezoid(running, dt)
