from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sasclab import world
from sasclab.allocation import Mode, allocate, is_unsafe, shared_policy_step
from sasclab.config import SafetyConfig


finite_control = st.tuples(
    st.floats(-1, 1, allow_nan=False, width=64),
    st.floats(-1, 1, allow_nan=False, width=64),
).map(np.array)


def test_unsafe_branch_replaces_verbatim():
    d = allocate(np.array([1.0, 1.0]), np.array([0.2, -0.3]), True)
    assert d.mode is Mode.REPLACE
    np.testing.assert_array_equal(d.applied, [0.2, -0.3])
    assert d.unsafe_flag


def test_agreeing_input_accepted_bit_exact():
    u = np.array([0.5, 0.0])
    d = allocate(u, np.array([1.0, 0.0]), False)
    assert d.mode is Mode.ACCEPT
    assert d.inner_product == pytest.approx(0.5)
    np.testing.assert_array_equal(d.applied, u)


def test_conflicting_input_rejected():
    d = allocate(np.array([0.5, 0.0]), np.array([-1.0, 0.0]), False)
    assert d.mode is Mode.REJECT
    np.testing.assert_array_equal(d.applied, np.zeros(2))


def test_quiescent_autonomy_accepts_everything():
    for u in ([1, 1], [-1, -1], [0.3, -0.9], [0, 0]):
        d = allocate(np.array(u, dtype=float), np.zeros(2), False)
        assert d.mode is Mode.ACCEPT
        np.testing.assert_array_equal(d.applied, u)


def test_zero_dot_boundary_accepts():
    d = allocate(np.array([0.7, 0.0]), np.array([0.0, 0.4]), False)
    assert d.inner_product == 0.0
    assert d.mode is Mode.ACCEPT


def test_nonfinite_controls_rejected():
    with pytest.raises(world.StateValidityError):
        allocate(np.array([np.nan, 0.0]), np.zeros(2), False)


@given(u=finite_control, ua=finite_control, flag=st.booleans())
@settings(max_examples=300, deadline=None)
def test_totality_and_branch_consistency(u, ua, flag):
    d = allocate(u, ua, flag)
    assert d.mode in (Mode.ACCEPT, Mode.REJECT, Mode.REPLACE)
    if flag:
        assert d.mode is Mode.REPLACE
        assert np.array_equal(d.applied, ua)
    elif float(u @ ua) >= 0:
        assert d.mode is Mode.ACCEPT
        assert np.array_equal(d.applied, u)
    else:
        assert d.mode is Mode.REJECT
        assert np.array_equal(d.applied, np.zeros(2))


@given(u=finite_control, ua=finite_control,
       c=st.floats(1e-6, 1e3, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_accept_test_scale_invariant(u, ua, c):
    base = allocate(u, ua, False).mode
    scaled = allocate(c * u, ua, False).mode
    assert base is scaled


@given(u=finite_control, ua=finite_control)
@settings(max_examples=200, deadline=None)
def test_antisymmetry(u, ua):
    d = allocate(u, ua, False)
    opposite = allocate(-u, ua, False)
    if d.mode is Mode.ACCEPT and d.inner_product != 0.0:
        assert opposite.mode is Mode.REJECT


def test_is_unsafe_strict_boundary(params, open_env):
    x = np.array([20.0, 8.0, 0, 0, 0, 0.0])
    distance, _ = world.distance_to_nearest_obstacle(x, open_env, 0.0,
                                                     params.lander_radius)
    config = SafetyConfig(d_safe=distance)  # exactly at the threshold
    flag, measured = is_unsafe(x, open_env, 0.0, config, params)
    assert measured == distance
    assert not flag
    closer = SafetyConfig(d_safe=distance + 1e-9)
    assert is_unsafe(x, open_env, 0.0, closer, params)[0]


def test_is_unsafe_hysteresis(params, open_env):
    config = SafetyConfig(d_safe=2.0, hysteresis=1.0)
    x_mid = np.array([20.0, 1.0 + 2.5, 0, 0, 0, 0.0])  # ground clearance 2.5
    # 2.0 <= 2.5 < 3.0: safe when calm, still unsafe when previously tripped
    assert not is_unsafe(x_mid, open_env, 0.0, config, params)[0]
    assert is_unsafe(x_mid, open_env, 0.0, config, params, was_unsafe=True)[0]


def test_shared_step_accepts_far_from_obstacles(fitted_model, open_env,
                                                config, params):
    x = np.array([20.0, 15.0, 0, 0, 0, 0.0])
    u = np.array([0.4, 0.2])
    d = shared_policy_step(x, open_env, 0.0, u, fitted_model, config.cost,
                           config.safety, params)
    assert d.mode is Mode.ACCEPT
    np.testing.assert_array_equal(d.applied, u)
    assert not d.unsafe_flag
    assert not d.fallback


def test_shared_step_replaces_inside_d_safe(fitted_model, open_env, config,
                                            params):
    x = np.array([20.0, 1.8, 0.0, 0.0, -1.0, 0.0])  # clearance 0.8 over ground
    u = np.array([1.0, 1.0])
    d = shared_policy_step(x, open_env, 0.0, u, fitted_model, config.cost,
                           config.safety, params)
    assert d.unsafe_flag
    assert d.mode is Mode.REPLACE
    np.testing.assert_array_equal(d.applied, d.u_autonomy)
    assert d.distance < config.safety.d_safe


def test_shared_step_is_source_agnostic(fitted_model, narrow_env, config,
                                        params):
    x = np.array([18.0, 4.0, 0.1, 0.5, -0.2, 0.0])
    u = np.array([0.5, -0.5])
    d1 = shared_policy_step(x, narrow_env, 2.0, u, fitted_model, config.cost,
                            config.safety, params)
    d2 = shared_policy_step(x, narrow_env, 2.0, u.copy(), fitted_model,
                            config.cost, config.safety, params)
    assert d1.mode is d2.mode
    np.testing.assert_array_equal(d1.applied, d2.applied)
    assert d1.inner_product == d2.inner_product
