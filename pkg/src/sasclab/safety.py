"""Safety-only optimal control: objective, gradients, action synthesis.

The objective knows nothing about the task.  Its running cost is

    l(x) = (w3 x3)^2 + (w4 x4)^2 + (w5 x5)^2 + (w6 x6)^2 + barrier(x1, x2)

where the barrier repels from the reference point of the nearest obstacle
(default: an inverse polynomial of order ``barrier_exponent`` saturating at
``scale / eps^(p/2)``; the ascending polynomial form is available behind
``barrier_form = "ascending"``).  The terminal cost is the stabilization
quadratic alone.  The goal boundary is deliberately not an input anywhere in
this module.

``sac_action`` synthesizes a single improving action along a zero-control
nominal rollout of the learned model: it integrates the exact discrete
costate backward, forms u*(t) = -R^-1 B^T rho(t) / dt clamped to the control
box, verifies the most promising insertion nodes by explicit rollout, and
returns the best candidate whose predicted cost beats the nominal by more
than its control-effort penalty u^T R u dt / 2 (otherwise zero).  Folding
the effort penalty into the comparison is the Hamiltonian trade-off of the
underlying single-action method; it is what keeps a stabilized hover
quiescent even though fighting gravity drift for one step would nominally
shave a little state cost.  Whenever a non-zero action is returned it
strictly improves the predicted cost.  If the learned model blows up on an
out-of-distribution state, a hand-tuned PD hover command is returned
instead and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, world
from .config import PhysicsParams, SafetyCostParams
from .koopman import KoopmanModel

# PD hover fallback gains: throttle against descent, torque against tilt/spin
FALLBACK_K_DESCENT = 1.0
FALLBACK_K_TILT = 2.0
FALLBACK_K_SPIN = 1.0

DEFAULT_CANDIDATES = 4


def cost_array(params: SafetyCostParams) -> np.ndarray:
    params.validate()
    return np.array([
        params.w3, params.w4, params.w5, params.w6,
        params.barrier_scale, params.barrier_eps,
        params.barrier_exponent / 2.0, params.terminal_weight,
        1.0 if params.barrier_form == "ascending" else 0.0,
    ])


def running_cost(state: np.ndarray, obstacle_center: tuple[float, float] | None,
                 params: SafetyCostParams) -> float:
    """Stabilization quadratic plus the obstacle barrier.

    ``obstacle_center`` of None means no obstacle in range: only the
    stabilization term contributes, so the cost is zero exactly on the
    stabilized manifold.
    """
    x = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise world.StateValidityError("running_cost requires a finite state")
    c = cost_array(params)
    if obstacle_center is None:
        return float(_kernels.terminal_cost_val(x, c) / params.terminal_weight)
    return float(_kernels.running_cost_val(x, obstacle_center[0],
                                           obstacle_center[1], c))


def cost_gradient(state: np.ndarray,
                  obstacle_center: tuple[float, float] | None,
                  params: SafetyCostParams) -> np.ndarray:
    """Exact analytic dl/dx."""
    x = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise world.StateValidityError("cost_gradient requires a finite state")
    c = cost_array(params)
    out = np.empty(6)
    if obstacle_center is None:
        _kernels.terminal_cost_grad(x, c, out)
        return out / params.terminal_weight
    _kernels.running_cost_grad(x, obstacle_center[0], obstacle_center[1],
                               c, out)
    return out


def terminal_cost(state: np.ndarray, params: SafetyCostParams) -> float:
    """Terminal cost: the stabilization quadratic, no barrier."""
    x = np.asarray(state, dtype=np.float64)
    return float(_kernels.terminal_cost_val(x, cost_array(params)))


def horizon_nodes(params: SafetyCostParams, dt: float) -> int:
    return max(1, round(params.horizon_s / dt))


def predicted_cost(model: KoopmanModel, state: np.ndarray,
                   control_schedule: np.ndarray, env: world.Environment,
                   t: float, params: SafetyCostParams,
                   physics: PhysicsParams) -> float:
    """Discrete-sum cost of rolling the model under a control schedule.

    J = sum_k l(x_k) dt + l_tf(x_L) where L = len(schedule); a zero-length
    schedule evaluates the terminal cost at the current state.  Scripted
    obstacles advance with the rollout clock.
    """
    sched = np.asarray(control_schedule, dtype=np.float64).reshape(-1, 2)
    n = horizon_nodes(params, model.dt_model)
    if len(sched) > n:
        raise ValueError(f"schedule of {len(sched)} nodes exceeds horizon {n}")
    circles, rects, dyn = env.geometry_arrays()
    x = np.asarray(state, dtype=np.float64)
    return float(_kernels.rollout_cost(
        model.k_states, x, t, model.dt_model, sched, circles, rects, dyn,
        env.ground_y, physics.lander_radius, cost_array(params)))


@dataclass(frozen=True)
class SacResult:
    """Synthesized action plus diagnostics for telemetry."""

    u: np.ndarray
    fallback: bool          # model blow-up, PD hover substituted
    improved: bool          # predicted cost strictly below the nominal
    j_nominal: float
    j_action: float
    node: int               # insertion node that produced the action


def _fallback_control(state: np.ndarray) -> np.ndarray:
    u1 = min(max(-FALLBACK_K_DESCENT * state[4], 0.0), 1.0)
    u2 = min(max(-FALLBACK_K_TILT * state[2] - FALLBACK_K_SPIN * state[5],
                 -1.0), 1.0)
    return np.array([u1, u2])


class SacContext:
    """Precomputed arrays for repeated action synthesis in one environment.

    The 60 Hz loop calls the policy every step; rebuilding geometry and cost
    packings per call would dominate the budget, so sessions hold one context
    per trial.
    """

    def __init__(self, model: KoopmanModel, env: world.Environment,
                 params: SafetyCostParams, physics: PhysicsParams,
                 n_candidates: int = DEFAULT_CANDIDATES):
        self.model = model
        self.env = env
        self.params = params
        self.physics = physics
        self.n_candidates = n_candidates
        self.ks = model.k_states
        self.dt = model.dt_model
        self.n_nodes = horizon_nodes(params, model.dt_model)
        self.cost = cost_array(params)
        self.r_mat = np.asarray(params.control_weight, dtype=np.float64)
        self.r_inv = params.r_inverse()
        self.circles, self.rects, self.dyn = env.geometry_arrays()
        self.ground_y = env.ground_y
        self.radius = physics.lander_radius

    def action(self, state: np.ndarray, t: float) -> SacResult:
        x = np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise world.StateValidityError("sac_action requires a finite state")
        u0, u1, status, j_nom, j_best, node = _kernels.sac_core(
            self.ks, x, t, self.dt, self.n_nodes, self.cost, self.r_mat,
            self.r_inv, self.params.action_threshold, self.circles,
            self.rects, self.dyn, self.ground_y, self.radius,
            self.n_candidates)
        if status == 2:
            return SacResult(u=_fallback_control(x), fallback=True,
                             improved=False, j_nominal=math.inf,
                             j_action=math.inf, node=-1)
        return SacResult(u=np.array([u0, u1]), fallback=False,
                         improved=(status == 0), j_nominal=float(j_nom),
                         j_action=float(j_best), node=int(node))


def sac_action_result(model: KoopmanModel, state: np.ndarray,
                      env: world.Environment, t: float,
                      params: SafetyCostParams, physics: PhysicsParams,
                      n_candidates: int = DEFAULT_CANDIDATES) -> SacResult:
    ctx = SacContext(model, env, params, physics, n_candidates)
    return ctx.action(state, t)


def sac_action(model: KoopmanModel, state: np.ndarray, env: world.Environment,
               t: float, params: SafetyCostParams,
               physics: PhysicsParams) -> np.ndarray:
    """The safety-aware autonomous command for the current state."""
    return sac_action_result(model, state, env, t, params, physics).u
