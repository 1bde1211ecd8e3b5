"""Independent reference computations used as test oracles."""
import math

import numpy as np


def zoh_rollout(p0, v0, u, dt, n):
    """Exact double-integrator rollout under a constant control for ``n`` steps of ``dt``."""
    p, v = p0, v0
    for _ in range(n):
        p, v = p + v * dt + 0.5 * u * dt * dt, v + u * dt
    return p, v


def arrival_bound(v, dp, dt, u_max, kappa):
    """Arrival-deadline bound written out term by term."""
    b = v - dp / dt - u_max * dt / 2.0
    # d/dt of b along v' = u, dp' = -v, dt' = -1:  u + v/dt - dp/dt^2 + u_max/2
    # require b' <= -kappa b  =>  u <= -kappa b - v/dt + dp/dt^2 - u_max/2
    return -kappa * b - v / dt + dp / dt**2 - u_max / 2.0


def departure_bound(v, dp, dt, u_max, kappa):
    """Departure-deadline bound: b = dp/dt - u_max dt/2 - v, b' = dp/dt^2 - v/dt + u_max/2 - u."""
    b = dp / dt - u_max * dt / 2.0 - v
    return kappa * b + dp / dt**2 - v / dt + u_max / 2.0


def stopping_bound(p, v, delta, delta_dot, gamma, u_max, kappa):
    """Stopping-distance bound: b = (v - delta_dot) - sqrt(2 u_max (delta - p - gamma))."""
    s = delta - p - gamma
    root = math.sqrt(2.0 * u_max * s)
    b = (v - delta_dot) - root
    # b' = u - delta_ddot + u_max (v - delta_dot) / root, with delta_ddot = 0
    return -kappa * b - u_max * (v - delta_dot) / root


def trapezoid(y, dt):
    y = np.asarray(y, dtype=float)
    return float(np.sum((y[1:] + y[:-1]) * dt / 2.0))


def linear_crossing(t, p, p_node):
    """First crossing of ``p_node`` by linear interpolation between bracketing samples."""
    t, p = np.asarray(t), np.asarray(p)
    idx = np.flatnonzero((p[:-1] <= p_node) & (p[1:] > p_node))
    if idx.size == 0:
        return None
    k = int(idx[0])
    return float(t[k] + (p_node - p[k]) / (p[k + 1] - p[k]) * (t[k + 1] - t[k]))


def crossing_barriers(log, window, p_node, u_max, until=math.inf):
    """Arrival and departure barrier values along a log while the window is relevant.

    Returns ``(b_arrival, b_departure)`` arrays: the first over samples before the window opens,
    the second over samples inside the open window, both restricted to samples before the node
    and to ``[granted_at, until)``.
    """
    t, p, v = np.asarray(log.t), np.asarray(log.p), np.asarray(log.v)
    dp = p_node - p
    live = (t >= window.granted_at) & (t < until) & (dp > 0)
    pre = (t < window.t_lo) & live
    dt1 = window.t_lo - t[pre]
    dte = np.minimum(dt1, np.sqrt(2.0 * dp[pre] / u_max))
    b_arr = v[pre] - dp[pre] / dte - u_max * dte / 2.0
    inside = (t >= window.t_lo) & (t < window.t_hi) & live
    dt2 = window.t_hi - t[inside]
    b_dep = dp[inside] / dt2 - u_max * dt2 / 2.0 - v[inside]
    return b_arr, b_dep


def worst_after_entry(b):
    """Largest barrier value after the first sample with ``b <= 0``; -inf if never entered."""
    b = np.asarray(b)
    hit = np.flatnonzero(b <= 0)
    if hit.size == 0:
        return -math.inf
    return float(np.max(b[hit[0]:]))
