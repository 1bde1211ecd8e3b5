import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import linear_crossing
from crossctl.controller import controller_step
from crossctl.core import ControllerMode, CrossingWindow, PrecedingSignal, VehicleParams, VehicleState
from crossctl.scenarios import random_scenario, reference_scenario
from crossctl.simulator import (
    BASELINE,
    POSITION,
    Lane,
    Scenario,
    ScenarioError,
    VehicleLog,
    VehicleSpec,
    World,
    audit_safety,
    crossing_instants,
    run,
)

PRM = VehicleParams()
LANES = (Lane("A", 60.0, {"X": 30.0}), Lane("B", 60.0, {"X": 30.0}))


def single(v0, nodes=None, **kw):
    lane = Lane("A", 200.0, nodes or {})
    return Scenario((lane,), (VehicleSpec(0, "A", 0.0, 0.0, v0, PRM),), **kw)


# ---------------------------------------------------------------- scenario validation

def test_scenario_validation():
    with pytest.raises(ScenarioError):
        Scenario(LANES, (), dt=0.0)
    with pytest.raises(ScenarioError):
        Scenario(LANES, (), dt=0.1, t_end=0.1)
    with pytest.raises(ScenarioError):
        Scenario(LANES, (VehicleSpec(0, "C", 0.0, 0.0, 1.0),))
    with pytest.raises(ScenarioError):
        Scenario(LANES, (VehicleSpec(0, "A", 0.0, 0.0, 1.0), VehicleSpec(0, "B", 0.0, 0.0, 1.0)))
    with pytest.raises(ScenarioError):
        Scenario(LANES, (VehicleSpec(0, "A", 0.0, 0.0, 1.0), VehicleSpec(1, "A", 0.0, 0.0, 1.0)))
    with pytest.raises(ScenarioError):
        Scenario(LANES, (), controller="mpc")
    with pytest.raises(ScenarioError):
        Lane("A", 10.0, {"X": 10.0})


# ---------------------------------------------------------------- stepping

def test_ballistic_step():
    w = World(single(30.0, dt=0.01))
    w.step()
    veh = w.vehicles[0]
    assert veh.p == pytest.approx(0.3) and veh.v == 30.0


def test_exact_zoh_update():
    # below the desired speed the feedback law accelerates; the update must be the exact integral
    sc = single(10.0, dt=0.5, t_end=5.0)
    lg = run(sc).logs[0]
    dt = sc.dt
    for k in range(len(lg) - 1):
        assert lg.p[k + 1] == pytest.approx(lg.p[k] + lg.v[k] * dt + 0.5 * lg.u[k] * dt * dt, rel=1e-15, abs=1e-12)
        assert lg.v[k + 1] == pytest.approx(lg.v[k] + lg.u[k] * dt, rel=1e-15)


def test_unit_acceleration_step():
    # u = alpha (v_d - v) = 2 from rest with alpha = 1, v_d = 2, dt = 1
    prm = VehicleParams(alpha=1.0, v_d=2.0)
    sc = Scenario((Lane("A", 100.0),), (VehicleSpec(0, "A", 0.0, 0.0, 0.0, prm),), dt=1.0, t_end=2.0)
    w = World(sc).step()
    assert (w.vehicles[0].p, w.vehicles[0].v) == (1.0, 2.0)


def test_time_grid_uniform():
    lg = run(reference_scenario()).logs[3]
    d = np.diff(lg.t)
    assert np.all(d > 0) and np.allclose(d, 0.01, atol=1e-12)


def test_new_leader_signal_refreshed_immediately():
    vs = (VehicleSpec(0, "A", 0.0, 0.0, 10.0, PRM), VehicleSpec(1, "A", 0.5, 12.0, 0.0, PRM))
    w = World(Scenario((Lane("A", 60.0),), vs, dt=0.01, t_end=3.0))
    while w.t < 0.5 - 1e-9:
        w.step()
        assert w._signal(w.vehicles[0]) == PrecedingSignal()
    w.step()
    sig = w._signal(w.vehicles[0])
    lead = w.vehicles[1]
    assert sig.present and sig.delta == lead.p + lead.v**2 / (2 * PRM.u_max) and sig.delta_dot == 0.0
    assert 12.0 <= sig.delta < 12.01
    assert w.vehicles[0].leader == 1


def test_spawn_deferred_until_gap_is_safe():
    # second vehicle would appear inside the first one's stopping distance
    vs = (VehicleSpec(0, "A", 0.0, 0.0, 2.0, PRM), VehicleSpec(1, "A", 0.2, 0.0, 30.0, PRM))
    res = run(Scenario((Lane("A", 100.0),), vs, dt=0.01, t_end=6.0))
    assert res.spawn_times[1] > 0.2
    assert res.audit.rear_end_violations == 0


# ---------------------------------------------------------------- runs

def test_equilibrium_run():
    res = run(single(30.0, t_end=3.0))
    lg = res.logs[0]
    assert np.all(lg.u == 0.0)
    assert res.J_alpha[0] == 0.0 and res.J_u[0] == 0.0
    assert res.audit.clean and res.audit.compliance == {}


def test_two_crossing_vehicles_separated():
    vs = (VehicleSpec(0, "A", 0.0, 0.0, 20.0, PRM), VehicleSpec(1, "B", 0.0, 0.0, 20.0, PRM))
    sc = Scenario(LANES, vs, dt=0.01, t_end=6.0)
    res = run(sc)
    tc = [linear_crossing(res.logs[i].t, res.logs[i].p, 30.0) for i in (0, 1)]
    assert None not in tc
    assert abs(tc[0] - tc[1]) >= sc.tau_sep - sc.dt
    assert res.audit.co_occupancy_violations == 0 and res.audit.clean


def test_run_is_deterministic():
    a, b = run(random_scenario(11)), run(random_scenario(11))
    for vid in a.logs:
        for f in ("t", "p", "v", "u", "u_lower", "u_upper"):
            assert np.array_equal(getattr(a.logs[vid], f), getattr(b.logs[vid], f))
        assert a.logs[vid].mode == b.logs[vid].mode
    assert a.grants == b.grants and a.J_u == b.J_u


def test_baseline_run_completes_and_is_linear():
    res = run(reference_scenario(controller=BASELINE))
    assert not res.planning_failures and res.audit.clean
    for vid, plans in res.plans.items():
        lg = res.logs[vid]
        plan = plans[0]
        m = (lg.t >= plan.t_start - 1e-9) & (lg.t <= plan.arrival_time)
        A = np.vstack([lg.t[m], np.ones(m.sum())]).T
        coef, *_ = np.linalg.lstsq(A, lg.u[m], rcond=None)
        assert np.max(np.abs(A @ coef - lg.u[m])) < 1e-9


def test_baseline_ignores_alpha():
    a = run(reference_scenario(0.25, controller=BASELINE))
    b = run(reference_scenario(1.5, controller=BASELINE))
    assert a.J_u == b.J_u


def test_response_delay_still_safe():
    sc = dataclasses.replace(random_scenario(5), response_delay=0.2)
    assert run(sc).audit.rear_end_violations == 0


def test_signalized_run_respects_green():
    from crossctl.coordinator import SignalPhase, SignalProgram
    prog = SignalProgram({"A": SignalPhase(10.0, 0.0, 4.0, "X", 30.0),
                          "B": SignalPhase(10.0, 5.0, 4.0, "X", 30.0)})
    vs = (VehicleSpec(0, "A", 0.0, 0.0, 25.0, PRM), VehicleSpec(1, "B", 0.0, 0.0, 25.0, PRM),
          VehicleSpec(2, "A", 1.0, 0.0, 25.0, PRM))
    res = run(Scenario(LANES, vs, dt=0.01, t_end=20.0, signal=prog))
    assert res.audit.clean
    for (vid, node), tc in res.audit.crossings.items():
        phase = prog.phases[res.logs[vid].lane]
        assert (tc - phase.offset_s) % phase.cycle_s <= phase.green_s + 0.01


@pytest.mark.parametrize("alpha", [0.25, 1.5])
def test_costs_converge_under_refinement(alpha):
    J = [run(reference_scenario(alpha, dt=dt)) for dt in (0.01, 0.005, 0.0025)]
    for key in ("J_u_mean", "J_alpha_mean"):
        v = [getattr(r, key) for r in J]
        assert abs(v[1] - v[2]) < abs(v[0] - v[1])


# ---------------------------------------------------------------- rear-end invariance

@settings(max_examples=40)
@given(st.floats(5, 30), st.floats(5, 30), st.floats(0.5, 40),
       st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=8))
def test_follower_keeps_gap_under_bounded_leader(v_lead, v_follow, gap, accel_levels):
    """Leader with piecewise-constant |acceleration| <= u_max; follower only sees its braking point."""
    dt, U, gamma = 0.01, PRM.u_max, PRM.gamma
    lp, lv = gap + gamma + v_follow**2 / (2 * U), v_lead  # start inside the stopping set
    fp, fv = 0.0, v_follow
    min_gap = math.inf
    for k in range(800):
        la = U * accel_levels[(k // 100) % len(accel_levels)]
        if lv <= 0 and la < 0:
            la = 0.0
        sig = PrecedingSignal(lp + lv * lv / (2 * U), 0.0)
        dec = controller_step(VehicleState(fp, fv), [], sig, PRM, ControllerMode.NOMINAL, k * dt, dt)
        u = dec.u
        if u < 0 and fv + u * dt < 0:
            fp, fv = fp - fv * fv / (2 * u), 0.0
        else:
            fp, fv = fp + fv * dt + 0.5 * u * dt * dt, fv + u * dt
        if la < 0 and lv + la * dt < 0:
            lp, lv = lp - lv * lv / (2 * la), 0.0
        else:
            lp, lv = lp + lv * dt + 0.5 * la * dt * dt, lv + la * dt
        min_gap = min(min_gap, lp - fp)
    assert min_gap >= gamma - 1e-6


def test_literal_position_signal_option_runs():
    sc = dataclasses.replace(reference_scenario(), rear_end_signal=POSITION)
    res = run(sc)
    assert res.audit.co_occupancy_violations == 0


# ---------------------------------------------------------------- audit

def _log(vid, lane, t, p, v=None, u=None):
    t = np.asarray(t, float)
    p = np.asarray(p, float)
    v = np.gradient(p, t) if v is None else np.asarray(v, float)
    u = np.zeros_like(t) if u is None else np.asarray(u, float)
    return VehicleLog(vid, lane, t, p, v, u, ["Nominal"] * len(t), -25 + 0 * t, 25 + 0 * t)


def test_audit_single_vehicle_vacuous():
    sc = Scenario(LANES, (VehicleSpec(0, "A", 0.0, 0.0, 10.0),), dt=0.1, t_end=5.0)
    t = np.arange(0, 5.01, 0.1)
    rep = audit_safety({0: _log(0, "A", t, 10 * t, 10 + 0 * t)}, sc)
    assert rep.clean and rep.rear_end_violations == 0 and rep.min_gap == math.inf


def test_audit_crossing_threshold():
    vs = (VehicleSpec(0, "A", 0.0, 0.0, 10.0), VehicleSpec(1, "B", 0.0, 0.0, 10.0))
    sc = Scenario(LANES, vs, dt=0.1, t_end=6.0, tau_sep=0.5)
    t = np.arange(0, 6.01, 0.1)
    ok = {0: _log(0, "A", t, 10 * t, 10 + 0 * t), 1: _log(1, "B", t, 10 * (t - 0.6), 10 + 0 * t)}
    assert audit_safety(ok, sc).co_occupancy_violations == 0
    bad = {0: ok[0], 1: _log(1, "B", t, 10 * (t - 0.3), 10 + 0 * t)}
    rep = audit_safety(bad, sc)
    assert rep.co_occupancy_violations == 1 and not rep.clean and rep.details


def test_audit_rear_end_breach():
    vs = (VehicleSpec(0, "A", 0.0, 5.0, 10.0), VehicleSpec(1, "A", 0.0, 0.0, 10.0))
    sc = Scenario(LANES, vs, dt=0.1, t_end=2.0)
    t = np.arange(0, 2.01, 0.1)
    logs = {0: _log(0, "A", t, 5 + 5 * t), 1: _log(1, "A", t, 10 * t)}
    rep = audit_safety(logs, sc)
    assert rep.rear_end_violations == 1 and rep.min_gap < 1.0


def test_crossing_instant_against_fine_resimulation():
    # constant acceleration from rest: exact crossing at sqrt(2 * 30 / 3)
    dt, a = 0.01, 3.0
    t = np.arange(0, 6.0, dt)
    log = _log(0, "A", t, 0.5 * a * t**2, a * t, a + 0 * t)
    fine = np.arange(0, 6.0, dt / 10)
    t_fine = linear_crossing(fine, 0.5 * a * fine**2, 30.0)
    got = crossing_instants(log, 30.0)
    assert abs(got - t_fine) <= dt / 10
    assert abs(got - linear_crossing(t, log.p, 30.0)) <= dt
    assert got == pytest.approx(math.sqrt(20.0), abs=1e-12)


def test_compliance_window_check():
    sc = Scenario(LANES, (VehicleSpec(0, "A", 0.0, 0.0, 10.0),), dt=0.1, t_end=6.0)
    from crossctl.coordinator import Grant
    t = np.arange(0, 6.01, 0.1)
    logs = {0: _log(0, "A", t, 10 * t, 10 + 0 * t, 0 * t)}
    assert audit_safety(logs, sc, [Grant(0, "X", 2.5, 3.5, 0.0)]).compliance == {0: True}
    rep = audit_safety(logs, sc, [Grant(0, "X", 4.0, 5.0, 0.0)])
    assert rep.compliance == {0: False} and not rep.clean
    superseded = [Grant(0, "X", 4.0, 5.0, 0.0, True), Grant(0, "X", 2.5, 3.5, 1.0)]
    assert audit_safety(logs, sc, superseded).compliance == {0: True}
