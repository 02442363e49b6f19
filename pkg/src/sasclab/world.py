"""Deterministic planar-lander world: physics, environments, outcomes.

State vector layout (float64, shape (6,)):

    x[0]  horizontal position (m)
    x[1]  vertical position (m)
    x[2]  heading (rad, 0 = upright, unwrapped)
    x[3]  horizontal velocity (m/s)
    x[4]  vertical velocity (m/s)
    x[5]  angular velocity (rad/s)

Controls are float64 arrays of shape (2,): ``u[0]`` throttles the main
thruster (force only for u[0] > 0) and ``u[1]`` the rotational jets.  Both
are clamped to [-1, 1] before integration.

The integrator is semi-implicit Euler at a fixed dt, so identical inputs
produce bit-identical outputs, which the replay machinery relies on.  Ground
contact below the crash thresholds is survivable: the lander is clamped onto
the surface with its descent zeroed, and the trial continues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import EnvLayout, PhysicsParams

STATE_DIM = 6
CONTROL_DIM = 2

# Fixed normalization scales for the six state components, used wherever a
# dimensionless state is needed (model error metrics, policy inputs).
STATE_SCALES = np.array([20.0, 15.0, math.pi / 2.0, 5.0, 5.0, 2.0])


class EnvId(enum.Enum):
    OPEN = "open"
    DYNAMIC = "dynamic"
    NARROW = "narrow"


class TrialStatus(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    CRASH = "crash"
    TIMEOUT = "timeout"

    @property
    def terminal(self) -> bool:
        return self is not TrialStatus.RUNNING


class CrashReason(enum.Enum):
    OBSTACLE = "obstacle contact"
    GROUND = "ground impact"
    OUT_OF_BOUNDS = "out of bounds"


class StateValidityError(ValueError):
    """Raised when a state or control contains non-finite components."""


@dataclass(frozen=True)
class CircleObstacle:
    cx: float
    cy: float
    radius: float


@dataclass(frozen=True)
class RectObstacle:
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class DynamicObstacle:
    """Circle crossing the world left to right on a fixed schedule.

    The center wraps modulo ``span`` so a fresh obstacle enters as soon as
    the previous one exits ("one at a time").  ``phase`` is the distance
    already traveled at t = 0 and is the only seed-dependent quantity.
    """

    cy: float
    radius: float
    speed: float
    x_enter: float
    span: float
    phase: float

    def center(self, t: float) -> tuple[float, float]:
        x = _kernels.dyn_center_x(t, self.speed, self.x_enter, self.span,
                                  self.phase)
        return float(x), self.cy


@dataclass(frozen=True)
class Environment:
    env_id: EnvId
    static_circles: tuple[CircleObstacle, ...]
    static_rects: tuple[RectObstacle, ...]
    dynamic_obstacles: tuple[DynamicObstacle, ...]
    ground_y: float
    goal_x: float
    goal_y0: float
    goal_y1: float
    spawn_state: np.ndarray
    bounds: tuple[float, float, float, float]   # x_min, x_max, y_min, y_max
    layout: EnvLayout = field(default_factory=EnvLayout)

    def geometry_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Obstacle geometry packed for the kernels (see _kernels docs).

        Built once and cached; the geometry of an Environment is immutable.
        """
        cached = getattr(self, "_geom_cache", None)
        if cached is not None:
            return cached
        circles = np.array([[c.cx, c.cy, c.radius] for c in self.static_circles],
                           dtype=np.float64).reshape(-1, 3)
        rects = np.array([[r.x0, r.y0, r.x1, r.y1] for r in self.static_rects],
                         dtype=np.float64).reshape(-1, 4)
        dyn = np.array([[d.cy, d.radius, d.speed, d.x_enter, d.span, d.phase]
                        for d in self.dynamic_obstacles],
                       dtype=np.float64).reshape(-1, 6)
        object.__setattr__(self, "_geom_cache", (circles, rects, dyn))
        return circles, rects, dyn

    def to_geometry_dict(self) -> dict:
        """JSON-friendly geometry export for the cockpit."""
        return {
            "env": self.env_id.value,
            "bounds": list(self.bounds),
            "ground_y": self.ground_y,
            "goal": {"x": self.goal_x, "y0": self.goal_y0, "y1": self.goal_y1},
            "spawn": self.spawn_state[:2].tolist(),
            "circles": [{"cx": c.cx, "cy": c.cy, "r": c.radius}
                        for c in self.static_circles],
            "rects": [{"x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}
                      for r in self.static_rects],
            "dynamic": [{"cy": d.cy, "r": d.radius, "speed": d.speed,
                         "x_enter": d.x_enter, "span": d.span, "phase": d.phase}
                        for d in self.dynamic_obstacles],
        }


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise StateValidityError(f"{what} contains non-finite components: {arr!r}")


def phys_array(params: PhysicsParams, ground_y: float) -> np.ndarray:
    return np.array([
        params.dt, params.gravity, params.mass, params.inertia,
        params.main_thrust_max, params.side_thrust_max, params.side_force_max,
        params.lander_radius, params.max_impact_speed, params.max_landing_tilt,
        ground_y,
    ])


def make_environment(env_id: EnvId | str, params: PhysicsParams,
                     seed: int, layout: EnvLayout | None = None) -> Environment:
    """Build one of the three experimental environments.

    * open: only the ground surface and the goal line.
    * dynamic: one scripted circular obstacle crossing at spawn altitude;
      the seed sets its crossing phase (and the spawn jitter), never its
      geometry.
    * narrow: two overhead slabs (separated by an unflyable slit) forcing a
      low slot between the ceiling and the ground; the geometry is
      seed-independent.
    """
    if isinstance(env_id, str):
        try:
            env_id = EnvId(env_id)
        except ValueError:
            raise ValueError(f"unknown environment id {env_id!r}") from None
    layout = layout or EnvLayout()
    layout.validate()
    rng = np.random.default_rng(seed)

    jitter = layout.spawn_jitter
    dx, dy = rng.uniform(-jitter, jitter, 2) if jitter > 0 else (0.0, 0.0)
    spawn = np.array([layout.spawn_x + dx, layout.spawn_y + dy,
                      0.0, 0.0, 0.0, 0.0])

    circles: tuple[CircleObstacle, ...] = ()
    rects: tuple[RectObstacle, ...] = ()
    dynamic: tuple[DynamicObstacle, ...] = ()

    if env_id is EnvId.DYNAMIC:
        x_enter = layout.x_min - layout.obstacle_margin - layout.obstacle_radius
        x_exit = layout.x_max + layout.obstacle_margin + layout.obstacle_radius
        span = x_exit - x_enter
        # keep the obstacle clear of the spawn point at t = 0
        for _ in range(64):
            phase = rng.uniform(0.0, span)
            cx = x_enter + phase
            if math.hypot(cx - spawn[0], layout.spawn_y - spawn[1]) \
                    >= layout.spawn_clearance_min:
                break
        dynamic = (DynamicObstacle(cy=layout.spawn_y,
                                   radius=layout.obstacle_radius,
                                   speed=layout.obstacle_speed,
                                   x_enter=x_enter, span=span, phase=phase),)
    elif env_id is EnvId.NARROW:
        mid = 0.5 * (layout.wall_x0 + layout.wall_x1)
        half_slit = 0.5 * layout.slit_width
        rects = (
            RectObstacle(layout.wall_x0, layout.ceiling_y, mid - half_slit,
                         layout.y_max),
            RectObstacle(mid + half_slit, layout.ceiling_y, layout.wall_x1,
                         layout.y_max),
        )

    env = Environment(
        env_id=env_id,
        static_circles=circles,
        static_rects=rects,
        dynamic_obstacles=dynamic,
        ground_y=layout.ground_y,
        goal_x=layout.goal_x,
        goal_y0=layout.goal_y0,
        goal_y1=layout.goal_y1,
        spawn_state=spawn,
        bounds=(layout.x_min, layout.x_max, layout.y_min, layout.y_max),
        layout=layout,
    )
    clearance, _ = distance_to_nearest_obstacle(spawn, env, 0.0,
                                                params.lander_radius)
    if clearance <= 0.0:
        raise ValueError("spawn state intersects an obstacle or the ground")
    return env


def step(state: np.ndarray, control: np.ndarray, env: Environment,
         params: PhysicsParams, t: float) -> np.ndarray:
    """Advance the lander by one fixed timestep.

    Controls are clamped to the box before integration; the main thruster is
    idle for non-positive throttle.  Deterministic: identical inputs yield
    bit-identical outputs.
    """
    state = np.asarray(state, dtype=np.float64)
    control = np.asarray(control, dtype=np.float64)
    _require_finite(state, "state")
    _require_finite(control, "control")
    if t < 0:
        raise ValueError("t must be non-negative")
    return _kernels.phys_step(state, control, phys_array(params, env.ground_y))


def distance_to_nearest_obstacle(state: np.ndarray, env: Environment,
                                 t: float,
                                 lander_radius: float) -> tuple[float, tuple[float, float]]:
    """Clearance from the bounding circle to the nearest surface.

    The ground participates (its reference point is the foot-point below the
    lander); scripted obstacles are evaluated at time ``t``.  Ties are broken
    by obstacle list order, with the ground last.  The returned distance is
    clamped at zero for penetrating contact.
    """
    circles, rects, dyn = env.geometry_arrays()
    clear, o1, o2, _, _ = _kernels.nearest_obstacle(
        float(state[0]), float(state[1]), t, circles, rects, dyn,
        env.ground_y, lander_radius)
    return max(0.0, float(clear)), (float(o1), float(o2))


def classify_outcome(state: np.ndarray, env: Environment,
                     params: PhysicsParams,
                     elapsed: float) -> tuple[TrialStatus, CrashReason | None]:
    """Map the current state onto a trial status.

    Checked in order: goal crossing, obstacle contact, hard ground contact
    (fast or tilted), out of bounds, timeout.  Sub-threshold ground contact
    is a legal touch and keeps the trial running.
    """
    state = np.asarray(state, dtype=np.float64)
    _require_finite(state, "state")
    if state[0] >= env.goal_x and env.goal_y0 <= state[1] <= env.goal_y1:
        return TrialStatus.SUCCESS, None

    circles, rects, dyn = env.geometry_arrays()
    _, _, _, obst_clear, ground_clear = _kernels.nearest_obstacle(
        float(state[0]), float(state[1]), elapsed, circles, rects, dyn,
        env.ground_y, params.lander_radius)
    if obst_clear <= 0.0:
        return TrialStatus.CRASH, CrashReason.OBSTACLE
    if ground_clear <= 1e-9:
        speed = math.hypot(state[3], state[4])
        if speed > params.max_impact_speed or abs(state[2]) > params.max_landing_tilt:
            return TrialStatus.CRASH, CrashReason.GROUND

    x_min, x_max, y_min, y_max = env.bounds
    if not (x_min <= state[0] <= x_max and y_min <= state[1] <= y_max):
        return TrialStatus.CRASH, CrashReason.OUT_OF_BOUNDS
    if elapsed > params.trial_timeout:
        return TrialStatus.TIMEOUT, None
    return TrialStatus.RUNNING, None


def clamp_control(u: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=np.float64), -1.0, 1.0)
