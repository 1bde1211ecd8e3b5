import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossctl import _pykernels as py
from crossctl import kernels

cy = kernels.compiled_backend
needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")

speed = st.floats(-5.0, 40.0)
dist = st.floats(0.0, 200.0)
horizon = st.floats(1e-3, 30.0)
pos = st.floats(-100.0, 100.0)


def same(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return a == pytest.approx(b, rel=1e-12, abs=1e-12)


@needs_ext
@given(speed, dist, horizon, st.floats(0.1, 50), st.floats(0.01, 5))
def test_crossing_kernels_agree(v, dp, dt, u_max, kappa):
    assert same(py.crossing_upper(v, dp, dt, u_max, kappa, 1e-3), cy.crossing_upper(v, dp, dt, u_max, kappa, 1e-3))
    assert same(py.crossing_lower(v, dp, dt, u_max, kappa), cy.crossing_lower(v, dp, dt, u_max, kappa))


@needs_ext
@given(pos, speed, st.floats(-1e-8, 100), speed, st.floats(0.1, 50), st.floats(0.01, 0.5))
def test_rear_end_kernels_agree(p, v, slack, lead_v, u_max, dt):
    delta = p + 1.0 + slack
    try:
        a = py.rear_end_upper(p, v, delta, lead_v, 1.0, u_max, 100.0)
    except ValueError:
        with pytest.raises(ValueError):
            cy.rear_end_upper(p, v, delta, lead_v, 1.0, u_max, 100.0)
    else:
        assert same(a, cy.rear_end_upper(p, v, delta, lead_v, 1.0, u_max, 100.0))
    assert same(py.rear_end_hold_guard(p, v, delta, lead_v, 1.0, u_max, dt),
                cy.rear_end_hold_guard(p, v, delta, lead_v, 1.0, u_max, dt))


windows = st.lists(st.tuples(st.floats(-20, 100), st.floats(0, 20), st.floats(0.01, 5)), max_size=4)


@needs_ext
@given(st.floats(-10, 50), speed, st.floats(0, 20), windows, st.one_of(st.none(), st.floats(1.01, 80)),
       st.booleans(), st.sampled_from([0.0, 0.01]))
def test_assemble_agrees(p, v, t, raw, lead_gap, departure, hold):
    wins = sorted((pn, lo, lo + w) for pn, lo, w in raw)
    delta = None if lead_gap is None else p + lead_gap
    dd = None if lead_gap is None else 3.0
    args = (p, v, t, 25.0, 0.5, 100.0, 1.0, delta, dd, wins, departure, 1e-3, hold)
    lo_a, hi_a = py.assemble(*args)
    lo_b, hi_b = cy.assemble(*args)
    assert same(lo_a, lo_b) and same(hi_a, hi_b)


@needs_ext
@given(st.floats(-100, 100), st.floats(-30, 30), st.floats(-30, 30))
def test_clamp_agrees(u, a, b):
    assert py.clamp(u, a, b) == cy.clamp(u, a, b)


@needs_ext
@given(st.floats(0, 30), st.floats(-20, 20), st.floats(0.05, 5))
def test_profile_checks_agree(v0, a, T):
    b = -a * T
    assert py.profile_ok(v0, a, b, T, 25.0, 30.0, 1e-3) == cy.profile_ok(v0, a, b, T, 25.0, 30.0, 1e-3)
    args = (0.0, v0, a, b, T, 0.0, 15.0, 20.0, 0.0, 0.0, 1.0, 0.0, T + 1.0, 60.0, 1e-3)
    assert same(py.min_gap(*args), cy.min_gap(*args))


def test_backend_selected_at_import():
    assert kernels.BACKEND_NAME in ("cython", "python")
    if cy is not None:
        assert kernels.backend is cy and kernels.BACKEND_NAME == "cython"


def test_pure_python_fallback_forced_by_environment():
    env = dict(os.environ, CROSSCTL_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from crossctl import kernels; print(kernels.BACKEND_NAME)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_python_backend_reproduces_reference_run():
    code = ("from crossctl.scenarios import reference_scenario; from crossctl.simulator import run;"
            "r = run(reference_scenario()); print(repr(r.J_u_mean), r.backend)")
    env = dict(os.environ, CROSSCTL_PURE_PYTHON="1")
    slow = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    fast = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    j_slow, backend = slow.stdout.split()
    j_fast, _ = fast.stdout.split()
    assert backend == "python"
    assert float(j_slow) == pytest.approx(float(j_fast), rel=1e-9)


def test_boundary_slack_limits():
    for k in (py,) + ((cy,) if cy is not None else ()):
        assert k.rear_end_upper(0.0, 0.0, 1.0, 0.0, 1.0, 25.0, 100.0) == 0.0
        assert k.rear_end_upper(0.0, 2.0, 1.0, 0.0, 1.0, 25.0, 100.0) == -math.inf
        assert k.rear_end_upper(0.0, 0.0, 1.0, 2.0, 1.0, 25.0, 100.0) == math.inf
        with pytest.raises(ValueError):
            k.rear_end_upper(0.0, 0.0, 0.9, 0.0, 1.0, 25.0, 100.0)
        assert k.rear_end_hold_guard(0.0, 0.0, 1.0 - 1e-12, 0.0, 1.0, 25.0, 0.01) == 0.0


@pytest.mark.parametrize("dp", [0.0, 5e-324, 1e-12, 1e-9])
def test_arrival_bound_on_the_node(dp):
    # within the tolerance the vehicle is parked on the node: hold if stopped, brake otherwise
    for k in (py,) + ((cy,) if cy is not None else ()):
        assert k.crossing_upper(0.0, dp, 1.0, 4.0, 1.0, 1e-3) == 0.0
        assert k.crossing_upper(2.0, dp, 1.0, 4.0, 1.0, 1e-3) == -math.inf


def test_arrival_bound_as_window_opens():
    for k in (py,) + ((cy,) if cy is not None else ()):
        assert k.crossing_upper(0.0, 1.0, 1e-186, 25.0, 0.5, 1e-3) == math.inf
        assert k.crossing_upper(0.0, 1.0, 1e-6, 25.0, 0.5, 1e-3) > 1e11


@given(pos, st.floats(0, 40), st.floats(1e-3, 50), st.floats(1e-3, 0.1))
def test_hold_guard_keeps_successor_in_stopping_set(p, v, slack, dt):
    """Holding the guard value for dt against a fixed braking point ends inside the set."""
    U, gamma = 25.0, 1.0
    delta = p + gamma + slack
    g = py.rear_end_hold_guard(p, v, delta, 0.0, gamma, U, dt)
    if g == -math.inf:
        # even full braking held for dt cannot end inside; the step overshoots at any u >= -U
        return
    u = max(g, -U)
    if g < -U:
        return
    if v + u * dt < 0:
        p1, v1 = p - v * v / (2 * u) if u < 0 else p, 0.0
    else:
        p1, v1 = p + v * dt + 0.5 * u * dt * dt, v + u * dt
    assert v1 <= math.sqrt(2 * U * max(delta - p1 - gamma, 0.0)) + 1e-7
