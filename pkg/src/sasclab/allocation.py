"""Unsafe predicate and the accept/reject/replace control allocator.

The allocator is the outer loop of the shared-control stack.  When the craft
is in the unsafe region (clearance below d_safe) the autonomy's command is
applied verbatim.  Otherwise the operator's command passes when its inner
product with the autonomy's command is non-negative and is zeroed when the
two disagree in direction, so a quiescent autonomy (u = 0) is fully
permissive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import world
from .config import PhysicsParams, SafetyConfig, SafetyCostParams
from .koopman import KoopmanModel
from .safety import sac_action_result


class Mode(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    REPLACE = "replace"


@dataclass(frozen=True)
class AllocationDecision:
    """One allocation outcome, carrying everything telemetry needs."""

    applied: np.ndarray
    mode: Mode
    unsafe_flag: bool
    inner_product: float
    distance: float = math.nan
    u_input: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u_autonomy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    fallback: bool = False


def is_unsafe(state: np.ndarray, env: world.Environment, t: float,
              config: SafetyConfig, physics: PhysicsParams,
              was_unsafe: bool = False) -> tuple[bool, float]:
    """Clearance test against d_safe (strict: distance == d_safe is safe).

    With a non-zero hysteresis band a tripped flag only clears once the
    clearance reaches d_safe + hysteresis, which suppresses chattering at
    the boundary.  The default band is zero.
    """
    distance, _ = world.distance_to_nearest_obstacle(state, env, t,
                                                     physics.lander_radius)
    threshold = config.d_safe + (config.hysteresis if was_unsafe else 0.0)
    return distance < threshold, distance


def allocate(u_input: np.ndarray, u_sa_a: np.ndarray, unsafe_flag: bool,
             distance: float = math.nan,
             fallback: bool = False) -> AllocationDecision:
    """Three-branch allocation.

    unsafe -> the autonomy's command, verbatim; safe and <u_h, u_a> >= 0 ->
    the operator's command, bit-exact; otherwise zero.
    """
    u_in = np.asarray(u_input, dtype=np.float64)
    u_sa = np.asarray(u_sa_a, dtype=np.float64)
    if not (np.all(np.isfinite(u_in)) and np.all(np.isfinite(u_sa))):
        raise world.StateValidityError("allocate requires finite controls")
    dot = float(u_in[0] * u_sa[0] + u_in[1] * u_sa[1])
    if unsafe_flag:
        applied, mode = u_sa.copy(), Mode.REPLACE
    elif dot >= 0.0:
        applied, mode = u_in.copy(), Mode.ACCEPT
    else:
        applied, mode = np.zeros(2), Mode.REJECT
    return AllocationDecision(applied=applied, mode=mode,
                              unsafe_flag=unsafe_flag, inner_product=dot,
                              distance=distance, u_input=u_in.copy(),
                              u_autonomy=u_sa.copy(), fallback=fallback)


def shared_policy_step(state: np.ndarray, env: world.Environment, t: float,
                       u_source: np.ndarray, model: KoopmanModel,
                       cost_params: SafetyCostParams,
                       safety_config: SafetyConfig, physics: PhysicsParams,
                       was_unsafe: bool = False) -> AllocationDecision:
    """One full shared-control decision.

    Synthesizes the autonomy's command, evaluates the unsafe predicate and
    allocates.  Source-agnostic: the operator command may come from a human,
    a scripted pilot or a learned policy.  The autonomy's fallback flag (PD
    hover after a model blow-up) propagates into the decision.
    """
    sac = sac_action_result(model, state, env, t, cost_params, physics)
    flag, distance = is_unsafe(state, env, t, safety_config, physics,
                               was_unsafe=was_unsafe)
    return allocate(u_source, sac.u, flag, distance=distance,
                    fallback=sac.fallback)
