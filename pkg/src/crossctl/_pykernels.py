"""Pure-Python hot kernels. ``_ckernels.pyx`` mirrors this module function for function."""
import math

import numpy as np

INF = math.inf
# gap slack (m) within which a follower counts as exactly on the stopping-set boundary
GAP_TOL = 1e-9


def crossing_upper(v, dp, dt1, u_max, kappa, v_stop):
    """Earliest-arrival bound on u, with the no-overshoot horizon substituted when shorter."""
    if dp <= GAP_TOL:
        # parked on the node before its window opens
        return 0.0 if v <= v_stop else -INF
    dt_star = math.sqrt(2.0 * dp / u_max)
    holding = dt1 >= dt_star
    dte = dt_star if holding else dt1
    if dte * dte == 0.0:
        # window opens within the float resolution of now: the bound tends to +inf
        return INF
    bound = -kappa * (v - dp / dte - 0.5 * u_max * dte) + (dp - v * dte) / (dte * dte) - 0.5 * u_max
    if holding and v <= v_stop and bound > 0.0:
        return 0.0
    return bound


def crossing_lower(v, dp, dt2, u_max, kappa):
    """Latest-departure bound on u."""
    return kappa * (dp / dt2 - 0.5 * u_max * dt2 - v) + (dp - v * dt2) / (dt2 * dt2) + 0.5 * u_max


def rear_end_upper(p, v, delta, delta_dot, gamma, u_max, kappa):
    """Stopping-distance bound on u behind a preceding vehicle; raises if the gap is already lost."""
    slack = delta - p - gamma
    closing = v - delta_dot
    if not slack > GAP_TOL:
        if not slack >= -GAP_TOL:
            raise ValueError(f"rear-end gap already violated: delta - p - gamma = {slack!r}")
        # on the boundary: limit of the bound as the slack vanishes
        return INF if closing < 0.0 else (0.0 if closing == 0.0 else -INF)
    root = math.sqrt(2.0 * u_max * slack)
    return -kappa * (closing - root) - u_max * closing / root


def rear_end_hold_guard(p, v, delta, delta_dot, gamma, u_max, dt):
    """Largest u held for ``dt`` that ends the step inside the stopping set, leader at constant speed."""
    slack = delta - p - gamma
    closing = v - delta_dot
    reach = slack - 0.5 * closing * dt
    if reach < 0.0:
        if reach < -GAP_TOL:
            return -INF
        reach = 0.0
    w_end = 0.5 * (-u_max * dt + math.sqrt(u_max * u_max * dt * dt + 8.0 * u_max * reach))
    return (w_end - closing) / dt


def assemble(p, v, t, u_max, kappa_T, kappa_R, gamma, delta, delta_dot, windows,
             include_departure, v_stop, hold_dt=0.0):
    """Return ``(u_lower, u_upper)`` from all active constraints.

    ``windows`` is a sequence of ``(p_node, t_lo, t_hi)`` sorted by ``p_node``.
    ``delta`` is ``None`` when no vehicle precedes. A positive ``hold_dt`` adds the
    sample-and-hold guard on the rear-end gap.
    """
    upper = u_max
    lower = -u_max
    nearest = True
    for p_node, t_lo, t_hi in windows:
        dp = p_node - p
        if dp < 0.0:
            continue
        if t_lo > t:
            upper = min(upper, crossing_upper(v, dp, t_lo - t, u_max, kappa_T, v_stop))
        if nearest:
            nearest = False
            # departure deadline binds only inside an open window
            if include_departure and t_lo <= t < t_hi:
                lower = max(lower, crossing_lower(v, dp, t_hi - t, u_max, kappa_T))
    if delta is not None:
        upper = min(upper, rear_end_upper(p, v, delta, delta_dot, gamma, u_max, kappa_R))
        if hold_dt > 0.0:
            upper = min(upper, rear_end_hold_guard(p, v, delta, delta_dot, gamma, u_max, hold_dt))
    return min(lower, u_max), max(upper, -u_max)


def clamp(u_ref, lower, upper):
    return min(max(u_ref, lower), upper)


def _profile_pos(t, p0, v0, a, b, T):
    # linear acceleration up to T, then cruise; t may be an array
    tc = np.minimum(t, T)
    vT = v0 + b * T + 0.5 * a * T * T
    return p0 + v0 * tc + 0.5 * b * tc * tc + a * tc * tc * tc / 6.0 + vT * np.maximum(t - T, 0.0)


def min_gap(p0, v0, a, b, T, t0, lp0, lv0, la, lb, lT, lt0, t_stop, p_exit, dt):
    """Smallest leader-minus-follower gap over samples ``t0, t0+dt, ..., t_stop`` (absolute time).

    Sampling stops at the first sample where the leader has passed ``p_exit``. Returns +inf
    when no sample is checked.
    """
    n = int(math.floor((t_stop - t0) / dt + 1e-9))
    tk = t0 + dt * np.arange(n + 1)
    lead = _profile_pos(tk - lt0, lp0, lv0, la, lb, lT)
    gone = np.flatnonzero(lead >= p_exit)
    if gone.size:
        tk, lead = tk[: gone[0]], lead[: gone[0]]
    if tk.size == 0:
        return INF
    return float(np.min(lead - _profile_pos(tk - t0, p0, v0, a, b, T)))


def profile_ok(v0, a, b, T, u_max, v_cap, dt):
    """Sampled check of ``|u| <= u_max`` and ``0 <= v <= v_cap`` on ``[0, T]`` for u = a t + b."""
    n = int(math.floor(T / dt + 1e-9))
    tk = dt * np.arange(n + 2)
    tk[-1] = T
    u = a * tk + b
    if np.max(np.abs(u)) > u_max + 1e-12:
        return False
    v = v0 + b * tk + 0.5 * a * tk * tk
    return bool(np.min(v) >= -1e-12 and np.max(v) <= v_cap + 1e-9)
