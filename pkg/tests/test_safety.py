from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from sasclab import _kernels, koopman, world
from sasclab.config import PhysicsParams, SafetyCostParams
from sasclab.safety import (
    SacContext,
    cost_gradient,
    predicted_cost,
    running_cost,
    sac_action,
    sac_action_result,
    terminal_cost,
)
from sasclab.world import CircleObstacle, EnvId, Environment


def circle_env(cx=20.0, cy=10.0, r=1.0) -> Environment:
    return Environment(
        env_id=EnvId.OPEN, static_circles=(CircleObstacle(cx, cy, r),),
        static_rects=(), dynamic_obstacles=(), ground_y=0.0,
        goal_x=33.0, goal_y0=0.0, goal_y1=42.0,
        spawn_state=np.array([5.0, 10.0, 0, 0, 0, 0.0]),
        bounds=(-8, 45, 0, 42))


@pytest.fixture(scope="module")
def cost_params():
    return SafetyCostParams()


def test_running_cost_hand_values(cost_params):
    x = np.array([0, 0, 0.1, 0, 0, 0.0])
    assert running_cost(x, None, cost_params) == pytest.approx(2.25)
    x = np.array([0, 0, 0, 0, 0, 0.5])
    assert running_cost(x, None, cost_params) == pytest.approx(25.0)


def test_running_cost_zero_at_stabilized_manifold(cost_params):
    assert running_cost(np.zeros(6), None, cost_params) == 0.0


def test_running_cost_nonnegative_random(cost_params, rng):
    for _ in range(200):
        x = rng.uniform(-5, 5, 6)
        o = tuple(rng.uniform(-5, 5, 2))
        assert running_cost(x, o, cost_params) >= 0.0


def test_barrier_saturates_at_obstacle_center(cost_params):
    x = np.array([3.0, 4.0, 0, 0, 0, 0.0])
    v = running_cost(x, (3.0, 4.0), cost_params)
    cap = cost_params.barrier_scale / cost_params.barrier_eps ** (
        cost_params.barrier_exponent // 2)
    assert math.isfinite(v)
    assert v == pytest.approx(cap)


def test_gradient_zero_at_minimum(cost_params):
    g = cost_gradient(np.zeros(6), None, cost_params)
    np.testing.assert_array_equal(g, np.zeros(6))


def fd_gradient(x, obstacle, params, h=1e-6):
    g = np.empty(6)
    for i in range(6):
        e = np.zeros(6); e[i] = h
        g[i] = (running_cost(x + e, obstacle, params) -
                running_cost(x - e, obstacle, params)) / (2 * h)
    return g


@pytest.mark.parametrize("form,scale,span", [("inverse", 100.0, (1.0, 4.0)),
                                             ("ascending", 1.0, (0.5, 1.8))])
def test_gradient_matches_finite_differences(form, scale, span, rng):
    # offsets are kept where the polynomial values stay small enough for
    # central differences to resolve every component
    params = SafetyCostParams(barrier_form=form, barrier_scale=scale)
    for _ in range(100):
        x = rng.uniform(-3, 3, 6)
        o = tuple(x[:2] + rng.uniform(*span, 2))
        g = cost_gradient(x, o, params)
        g_fd = fd_gradient(x, o, params)
        np.testing.assert_allclose(g, g_fd, rtol=1e-4, atol=1e-5)


def test_gradient_sign_ascending_form():
    # the literal polynomial grows with distance, so dl/dx1 carries the sign
    # of (x1 - o1); the repulsive default points the *descent* away instead
    params = SafetyCostParams(barrier_form="ascending", barrier_scale=1.0)
    x = np.array([5.0, 10.0, 0, 0, 0, 0.0])
    g_right = cost_gradient(x, (3.0, 10.0), params)
    assert math.copysign(1, g_right[0]) == math.copysign(1, x[0] - 3.0)
    g_inv = cost_gradient(x, (3.0, 10.0), SafetyCostParams())
    assert math.copysign(1, g_inv[0]) == -math.copysign(1, x[0] - 3.0)


def test_terminal_cost_has_no_barrier(cost_params):
    near = np.array([20.0, 10.5, 0, 0, 0, 0.0])
    assert terminal_cost(near, cost_params) == 0.0


def test_predicted_cost_zero_length_schedule(fitted_model, open_env,
                                             cost_params, params):
    x = np.array([20.0, 10.0, 0.2, 1.0, -0.5, 0.3])
    j = predicted_cost(fitted_model, x, np.empty((0, 2)), open_env, 0.0,
                       cost_params, params)
    assert j == pytest.approx(terminal_cost(x, cost_params))


def test_predicted_cost_stabilized_is_zero(fitted_model, open_env,
                                           cost_params, params):
    x = np.array([20.0, 15.0, 0, 0, 0, 0.0])
    j = predicted_cost(fitted_model, x, np.empty((0, 2)), open_env, 0.0,
                       cost_params, params)
    assert j <= 1e-9


def test_predicted_cost_linear_in_squared_weights(fitted_model, open_env,
                                                  params):
    # the stabilization term is linear in the squared weights: scaling every
    # weight by sqrt(2) doubles the stabilization contribution exactly
    base = SafetyCostParams(barrier_scale=0.0)
    boosted = dataclasses.replace(base, w3=base.w3 * math.sqrt(2),
                                  w4=base.w4 * math.sqrt(2),
                                  w5=base.w5 * math.sqrt(2),
                                  w6=base.w6 * math.sqrt(2))
    x = np.array([20.0, 15.0, 0.2, 1.0, -1.0, 0.4])
    sched = np.zeros((30, 2))
    j1 = predicted_cost(fitted_model, x, sched, open_env, 0.0, base, params)
    j2 = predicted_cost(fitted_model, x, sched, open_env, 0.0, boosted, params)
    assert j2 == pytest.approx(2.0 * j1, rel=1e-9)


def test_predicted_cost_matches_python_reference(fitted_model, cost_params,
                                                 params, rng):
    """Independent slow-path oracle: predict_next + running cost, stepwise."""
    env = circle_env()
    for _ in range(5):
        x = rng.uniform([10, 6, -0.3, -1, -1, -0.5], [30, 14, 0.3, 1, 1, 0.5])
        sched = rng.uniform(-1, 1, size=(12, 2))
        j = predicted_cost(fitted_model, x, sched, env, 0.0, cost_params,
                           params)
        # reference computation
        ref = 0.0
        xi = x.copy()
        dt = fitted_model.dt_model
        for k, u in enumerate(sched):
            d, center = world.distance_to_nearest_obstacle(
                xi, env, k * dt, params.lander_radius)
            ref += running_cost(xi, center, cost_params) * dt
            xi = koopman.predict_next(fitted_model, xi, u)
        ref += terminal_cost(xi, cost_params)
        assert j == pytest.approx(ref, rel=1e-12)


def test_sac_stabilized_hover_returns_zero(fitted_model, open_env,
                                           cost_params, params):
    x = np.array([20.0, 15.0, 0, 0, 0, 0.0])
    u = sac_action(fitted_model, x, open_env, 0.0, cost_params, params)
    np.testing.assert_array_equal(u, np.zeros(2))


def one_step_cost(model, x, u, env, params, physics, horizon=None):
    """Cost of applying u for one step, then drifting to the horizon."""
    if horizon is None:
        from sasclab.safety import horizon_nodes
        horizon = horizon_nodes(params, model.dt_model)
    sched = np.zeros((horizon, 2))
    sched[0] = u
    return predicted_cost(model, x, sched, env, 0.0, params, physics)


def grid_best(model, x, env, params, physics, horizon=None):
    grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
    best, best_u = math.inf, None
    for u1 in grid:
        for u2 in grid:
            j = one_step_cost(model, x, (u1, u2), env, params, physics,
                              horizon)
            if j < best:
                best, best_u = j, (u1, u2)
    return best, best_u


def test_sac_opposes_spin_like_grid_oracle(fitted_model, open_env,
                                           cost_params, params):
    x = np.array([20.0, 15.0, 0.0, 0.0, 0.0, 1.0])
    u = sac_action(fitted_model, x, open_env, 0.0, cost_params, params)
    _, gu = grid_best(fitted_model, x, open_env, cost_params, params)
    assert u[1] < 0
    assert gu[1] < 0  # exhaustive search agrees on the corrective sign


def test_sac_above_obstacle_improves_one_step_cost(fitted_model, cost_params,
                                                   params):
    env = circle_env(cx=20.0, cy=10.0)
    x = np.array([20.0, 13.2, 0.0, 0.0, -1.5, 0.0])  # descending, inside d_safe reach
    u = sac_action(fitted_model, x, env, 0.0, cost_params, params)
    j_u = one_step_cost(fitted_model, x, u, env, cost_params, params)
    j_0 = one_step_cost(fitted_model, x, (0, 0), env, cost_params, params)
    assert j_u < j_0
    j_grid, _ = grid_best(fitted_model, x, env, cost_params, params)
    assert j_grid < j_0  # the brute-force oracle also sees an improvement


def test_sac_horizon_improvement_guarantee(fitted_model, open_env,
                                           cost_params, params, rng):
    """Any non-zero action strictly improves the full-horizon cost."""
    n = _kernels  # noqa: F841  (kernel-backed path exercised via SacContext)
    ctx = SacContext(fitted_model, open_env, cost_params, params)
    horizon = ctx.n_nodes
    improved = 0
    for _ in range(100):
        x = rng.uniform([5, 5, -0.4, -2, -2, -1], [35, 20, 0.4, 2, 2, 1])
        res = ctx.action(x, 0.0)
        if not res.improved:
            continue
        improved += 1
        sched = np.zeros((horizon, 2))
        sched[0] = res.u
        j_u = predicted_cost(fitted_model, x, sched, open_env, 0.0,
                             cost_params, params)
        j_nom = predicted_cost(fitted_model, x, np.zeros((horizon, 2)),
                               open_env, 0.0, cost_params, params)
        assert j_u < j_nom
        assert j_u == pytest.approx(res.j_action, rel=1e-9)
        assert j_nom == pytest.approx(res.j_nominal, rel=1e-9)
    assert improved > 50  # random unstable states mostly admit an action


def unstable_state(rng):
    """Draw from the outer shell of the model's training envelope.

    "Unstable" means meaningfully off the stabilized manifold: large tilt,
    speed or spin (with random signs), positions well inside the world.
    """
    signs = rng.choice([-1.0, 1.0], 4)
    return np.array([
        rng.uniform(5, 35),
        rng.uniform(6, 20),
        signs[0] * rng.uniform(0.3, 0.6),
        signs[1] * rng.uniform(2.0, 4.0),
        signs[2] * rng.uniform(2.0, 4.0),
        signs[3] * rng.uniform(0.8, 1.5),
    ])


def test_sac_improvement_property_sample(fitted_model, open_env, cost_params,
                                         params, rng):
    """Applied-for-one-step cost beats drifting in >= 95% of unstable states
    and stays within 5% of the exhaustive 5x5 grid."""
    wins = 0
    total = 200
    for _ in range(total):
        x = unstable_state(rng)
        u = sac_action(fitted_model, x, open_env, 0.0, cost_params, params)
        j_u = one_step_cost(fitted_model, x, u, open_env, cost_params, params)
        j_0 = one_step_cost(fitted_model, x, (0, 0), open_env, cost_params,
                            params)
        if j_u <= j_0:
            wins += 1
        j_grid, _ = grid_best(fitted_model, x, open_env, cost_params, params)
        assert j_u <= 1.05 * j_grid + 1e-9
    assert wins / total >= 0.95


def test_sac_deterministic(fitted_model, open_env, cost_params, params):
    x = np.array([12.0, 8.0, 0.3, 1.0, -1.0, 0.5])
    u1 = sac_action(fitted_model, x, open_env, 0.0, cost_params, params)
    u2 = sac_action(fitted_model, x, open_env, 0.0, cost_params, params)
    np.testing.assert_array_equal(u1, u2)


def test_sac_is_goal_indifferent(fitted_model, cost_params, params):
    """The goal boundary is not an input: moving it cannot change the action."""
    x = np.array([20.0, 15.0, 0.0, 0.0, 0.0, 0.0])
    actions = []
    for goal_x in (10.0, 25.0, 40.0):
        env = dataclasses.replace(
            world.make_environment(EnvId.OPEN, params, 0), goal_x=goal_x)
        actions.append(sac_action(fitted_model, x, env, 0.0, cost_params,
                                  params))
    np.testing.assert_array_equal(actions[0], np.zeros(2))
    np.testing.assert_array_equal(actions[0], actions[1])
    np.testing.assert_array_equal(actions[1], actions[2])


def test_sac_fallback_on_model_blowup(open_env, cost_params, params):
    k = np.zeros((25, 25))
    for i in range(25):
        k[i, i] = 1e6  # overflows to inf within the rollout horizon
    bad = koopman.KoopmanModel(k=k, dt_model=params.dt, fit_residual=0.0)
    x = np.array([20.0, 15.0, 0.3, 0.0, -2.0, 0.5])
    res = sac_action_result(bad, x, open_env, 0.0, cost_params, params)
    assert res.fallback
    assert np.all(np.isfinite(res.u))
    assert res.u[0] > 0  # PD hover fights the descent


def test_ground_penetration_prior_blocks_underground_escape(
        fitted_model, open_env, cost_params, params):
    # an imagined below-ground state must cost more than hovering above it
    sched = np.zeros((30, 2))
    above = np.array([20.0, 3.0, 0, 0, 0, 0.0])
    below = np.array([20.0, -3.0, 0, 0, 0, 0.0])
    j_above = predicted_cost(fitted_model, above, sched, open_env, 0.0,
                             cost_params, params)
    j_below = predicted_cost(fitted_model, below, sched, open_env, 0.0,
                             cost_params, params)
    assert j_below > j_above
