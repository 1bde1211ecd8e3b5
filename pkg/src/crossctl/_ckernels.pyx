# cython: language_level=3
"""Compiled twin of ``_pykernels``; same signatures and semantics."""
from libc.math cimport sqrt, floor, fabs, INFINITY

# gap slack (m) within which a follower counts as exactly on the stopping-set boundary
cdef double GAP_TOL = 1e-9


cpdef double crossing_upper(double v, double dp, double dt1, double u_max, double kappa,
                            double v_stop):
    cdef double dt_star, dte, bound
    cdef bint holding
    if dp <= GAP_TOL:
        return 0.0 if v <= v_stop else -INFINITY
    dt_star = sqrt(2.0 * dp / u_max)
    holding = dt1 >= dt_star
    dte = dt_star if holding else dt1
    if dte * dte == 0.0:
        return INFINITY
    bound = -kappa * (v - dp / dte - 0.5 * u_max * dte) + (dp - v * dte) / (dte * dte) - 0.5 * u_max
    if holding and v <= v_stop and bound > 0.0:
        return 0.0
    return bound


cpdef double crossing_lower(double v, double dp, double dt2, double u_max, double kappa):
    return kappa * (dp / dt2 - 0.5 * u_max * dt2 - v) + (dp - v * dt2) / (dt2 * dt2) + 0.5 * u_max


cpdef double rear_end_upper(double p, double v, double delta, double delta_dot, double gamma,
                            double u_max, double kappa) except? -1e308:
    cdef double slack = delta - p - gamma
    cdef double closing = v - delta_dot
    cdef double root
    if not slack > GAP_TOL:
        if not slack >= -GAP_TOL:
            raise ValueError(f"rear-end gap already violated: delta - p - gamma = {slack!r}")
        # on the boundary: limit of the bound as the slack vanishes
        if closing < 0.0:
            return INFINITY
        return 0.0 if closing == 0.0 else -INFINITY
    root = sqrt(2.0 * u_max * slack)
    return -kappa * (closing - root) - u_max * closing / root


cpdef double rear_end_hold_guard(double p, double v, double delta, double delta_dot, double gamma,
                                 double u_max, double dt):
    cdef double slack = delta - p - gamma
    cdef double closing = v - delta_dot
    cdef double reach = slack - 0.5 * closing * dt
    cdef double w_end
    if reach < 0.0:
        if reach < -GAP_TOL:
            return -INFINITY
        reach = 0.0
    w_end = 0.5 * (-u_max * dt + sqrt(u_max * u_max * dt * dt + 8.0 * u_max * reach))
    return (w_end - closing) / dt


def assemble(double p, double v, double t, double u_max, double kappa_T, double kappa_R,
             double gamma, delta, delta_dot, windows, bint include_departure, double v_stop,
             double hold_dt=0.0):
    cdef double upper = u_max
    cdef double lower = -u_max
    cdef double dp, p_node, t_lo, t_hi, b
    cdef bint nearest = True
    for w in windows:
        p_node, t_lo, t_hi = w
        dp = p_node - p
        if dp < 0.0:
            continue
        if t_lo > t:
            b = crossing_upper(v, dp, t_lo - t, u_max, kappa_T, v_stop)
            if b < upper:
                upper = b
        if nearest:
            nearest = False
            if include_departure and t_lo <= t < t_hi:
                b = crossing_lower(v, dp, t_hi - t, u_max, kappa_T)
                if b > lower:
                    lower = b
    if delta is not None:
        b = rear_end_upper(p, v, delta, delta_dot, gamma, u_max, kappa_R)
        if b < upper:
            upper = b
        if hold_dt > 0.0:
            b = rear_end_hold_guard(p, v, delta, delta_dot, gamma, u_max, hold_dt)
            if b < upper:
                upper = b
    if lower > u_max:
        lower = u_max
    if upper < -u_max:
        upper = -u_max
    return lower, upper


cpdef double clamp(double u_ref, double lower, double upper):
    if u_ref < lower:
        u_ref = lower
    if u_ref > upper:
        u_ref = upper
    return u_ref


cdef inline double _profile_pos(double t, double p0, double v0, double a, double b, double T):
    cdef double vT
    if t <= T:
        return p0 + v0 * t + 0.5 * b * t * t + a * t * t * t / 6.0
    vT = v0 + b * T + 0.5 * a * T * T
    return p0 + v0 * T + 0.5 * b * T * T + a * T * T * T / 6.0 + vT * (t - T)


cpdef double min_gap(double p0, double v0, double a, double b, double T, double t0,
                     double lp0, double lv0, double la, double lb, double lT, double lt0,
                     double t_stop, double p_exit, double dt):
    cdef long n = <long>floor((t_stop - t0) / dt + 1e-9)
    cdef long k
    cdef double best = INFINITY
    cdef double tk, lead, gap
    for k in range(n + 1):
        tk = t0 + k * dt
        lead = _profile_pos(tk - lt0, lp0, lv0, la, lb, lT)
        if lead >= p_exit:
            break
        gap = lead - _profile_pos(tk - t0, p0, v0, a, b, T)
        if gap < best:
            best = gap
    return best


cpdef bint profile_ok(double v0, double a, double b, double T, double u_max, double v_cap,
                      double dt):
    cdef long n = <long>floor(T / dt + 1e-9)
    cdef long k
    cdef double tk, u, vk
    for k in range(n + 2):
        tk = T if k == n + 1 else k * dt
        u = a * tk + b
        if fabs(u) > u_max + 1e-12:
            return False
        vk = v0 + b * tk + 0.5 * a * tk * tk
        if vk < -1e-12 or vk > v_cap + 1e-9:
            return False
    return True
