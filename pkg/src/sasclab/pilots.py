"""Scripted surrogate operators.

These stand in for human subjects in headless runs.  All pilots are pure
functions of (spec, observed state, env, t, rng): reaction delay is realized
by the session loop feeding the pilot a stale state, so determinism per seed
is trivial and replays stay exact.

* expert: waypoint-following PD toward the goal boundary with altitude hold
  (gap-center altitude in the narrow-passage world).  Past the goal line it
  goes idle.
* novice: the expert law with detuned gains, seeded Gaussian input noise and
  a reaction delay.  The detuning plus delay make the attitude loop
  oscillatory, which is the dominant failure mode under user-only control.
* adversarial: steers straight at the nearest obstacle at the expert's speed
  clamp; a stress probe for the safety filter.
* replay: replays a recorded input stream, holding (0, 0) past its end.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, world
from .config import NoviceParams, PilotGains


class PilotKind(enum.Enum):
    EXPERT = "expert"
    NOVICE = "novice"
    ADVERSARIAL = "adversarial"
    REPLAY = "replay"


_N_WAVES = 4  # sinusoid components per control channel


@dataclass(frozen=True)
class PilotSpec:
    kind: PilotKind
    gains: PilotGains = field(default_factory=PilotGains)
    noise_amp: float = 0.0            # fast command jitter, both channels (0.3..2 Hz)
    drift_amp: float = 0.0            # slow perceived-position wander (m, 0.05..0.2 Hz)
    delay_steps: int = 0
    aim_sigma: float = 0.0            # per-trial vertical aim error (m, 1 sd)
    aim_offset: float = 0.0           # resolved offset for this trial
    aim_residual: float = 0.0         # fraction of aim error left at the wall
    aim_learn_s: float = 25.0         # trial time over which the residual fades
    stress_gain: float = 0.0          # extra noise multiplier near obstacles
    stress_range: float = 4.0         # clearance (m) below which stress applies
    spasm_interval: float = 0.0       # mean seconds between panic bursts (0 = off)
    spasm_duration: float = 0.25      # seconds a burst lasts
    hover_throttle: float = 0.5       # learned feel for the hover point
    noise_waves: tuple = ()           # per-trial (channel, amp, freq, phase) bank
    drift_waves: tuple = ()           # per-trial (axis, amp, freq, phase) bank
    spasms: tuple = ()                # per-trial (t0, t1, du1, du2) bursts
    replay_controls: np.ndarray | None = None
    replay_dt: float = 1.0 / 60.0

    def __post_init__(self):
        if self.noise_amp < 0 or self.delay_steps < 0 or self.aim_sigma < 0:
            raise ValueError("noise_amp, delay_steps and aim_sigma must be non-negative")
        if self.kind is PilotKind.REPLAY and self.replay_controls is None:
            raise ValueError("replay pilot needs a recorded control stream")

    def resolve_trial(self, rng: np.random.Generator) -> "PilotSpec":
        """Draw the trial-constant latents from the trial rng.

        Input noise is a bank of low-frequency sinusoids (0.3..2 Hz) with
        random frequencies and phases: white noise at the loop rate would
        integrate to nothing through the double integrator, but slow drift
        is what actually moves a craft off its line.  The aim error is a
        per-trial altitude misjudgment.
        """
        import dataclasses
        changes = {}
        if self.aim_sigma > 0:
            changes["aim_offset"] = float(rng.normal(0.0, self.aim_sigma))
        norm = math.sqrt(_N_WAVES / 2.0)
        if self.noise_amp > 0:
            waves = []
            for channel in range(2):
                for _ in range(_N_WAVES):
                    waves.append((channel, self.noise_amp / norm,
                                  float(rng.uniform(0.3, 2.0)),
                                  float(rng.uniform(0.0, 2.0 * math.pi))))
            changes["noise_waves"] = tuple(waves)
        if self.drift_amp > 0:
            # horizontal wander is fast and small; vertical wander is the
            # dominant, slow component that sets line-holding precision
            waves = []
            for _ in range(_N_WAVES):
                waves.append((0, 0.5 * self.drift_amp / norm,
                              float(rng.uniform(0.1, 0.3)),
                              float(rng.uniform(0.0, 2.0 * math.pi))))
            for _ in range(_N_WAVES):
                waves.append((1, self.drift_amp / norm,
                              float(rng.uniform(0.08, 0.16)),
                              float(rng.uniform(0.0, 2.0 * math.pi))))
            changes["drift_waves"] = tuple(waves)
        if self.spasm_interval > 0:
            spasms = []
            t = float(rng.uniform(0.5 * self.spasm_interval,
                                  1.5 * self.spasm_interval))
            while t < 90.0:
                theta = float(rng.uniform(0.0, 2.0 * math.pi))
                spasms.append((t, t + self.spasm_duration,
                               1.5 * math.cos(theta), 1.5 * math.sin(theta)))
                t += float(rng.uniform(0.5 * self.spasm_interval,
                                       1.5 * self.spasm_interval))
            changes["spasms"] = tuple(spasms)
        return dataclasses.replace(self, **changes) if changes else self


def expert_spec(gains: PilotGains | None = None) -> PilotSpec:
    return PilotSpec(kind=PilotKind.EXPERT, gains=gains or PilotGains())


def novice_spec(gains: PilotGains | None = None,
                params: NoviceParams | None = None, **overrides) -> PilotSpec:
    """Novice spec from a NoviceParams block (see config), with overrides."""
    base = gains or PilotGains()
    p = params or NoviceParams()
    if overrides:
        import dataclasses
        p = dataclasses.replace(p, **overrides)
    return PilotSpec(kind=PilotKind.NOVICE, gains=base.scaled(p.gain_scale),
                     noise_amp=p.noise_amp, drift_amp=p.drift_amp,
                     delay_steps=p.delay_steps, aim_sigma=p.aim_sigma,
                     aim_residual=p.aim_residual, aim_learn_s=p.aim_learn_s,
                     stress_gain=p.stress_gain,
                     spasm_interval=p.spasm_interval)


def adversarial_spec(gains: PilotGains | None = None) -> PilotSpec:
    return PilotSpec(kind=PilotKind.ADVERSARIAL, gains=gains or PilotGains())


def replay_spec(controls: np.ndarray, dt: float) -> PilotSpec:
    arr = np.asarray(controls, dtype=np.float64).reshape(-1, 2)
    return PilotSpec(kind=PilotKind.REPLAY, replay_controls=arr, replay_dt=dt)


def _cruise_altitude(env: world.Environment) -> float:
    if env.env_id is world.EnvId.NARROW:
        return 0.5 * (env.layout.ground_y + env.layout.ceiling_y)
    return env.layout.spawn_y


def _track_velocity(spec: PilotSpec, state: np.ndarray, vx_des: float,
                    vy_des: float, gravity: float = 1.62) -> np.ndarray:
    """Inner loop: track a desired velocity with throttle + tilt/strafe."""
    g = spec.gains
    x3, x4, x5, x6 = state[2], state[3], state[4], state[5]
    a_up = gravity + g.kd_alt * (vy_des - x5)
    ax_des = g.kd_vel * (vx_des - x4)
    c3 = math.cos(x3)
    if abs(x3) < 1.2:
        u1 = spec.hover_throttle * (a_up / gravity) / c3
    else:
        u1 = spec.hover_throttle
    tilt_des = math.atan2(ax_des, max(a_up, 0.5 * gravity))
    tilt_des = min(max(tilt_des, -g.tilt_max), g.tilt_max)
    u2 = g.kp_att * (tilt_des - x3) - g.kd_att * x6 \
        + g.k_strafe * (vx_des - x4)
    return np.array([min(max(u1, 0.0), 1.0), min(max(u2, -1.0), 1.0)])


def _expert_control(spec: PilotSpec, state: np.ndarray,
                    env: world.Environment, t: float) -> np.ndarray:
    if state[0] >= env.goal_x:
        return np.zeros(2)
    g = spec.gains
    # the passage is flown in two legs: decelerate to the gap, then run for
    # the goal once through
    aim_error = spec.aim_offset
    v_max = g.v_max
    if env.env_id is world.EnvId.NARROW and state[0] < env.layout.wall_x1 + 0.5:
        wp_x = env.layout.wall_x1 + 2.5
        # a mis-judged approach altitude is corrected late (as the wall face
        # comes up) and incompletely; what residual is left fades over the
        # trial clock as the operator works out where the gap actually is
        gap_dist = env.layout.wall_x0 - state[0]
        fade = min(max(gap_dist / 12.0, 0.0), 1.0)
        learned = min(max(t / spec.aim_learn_s, 0.0), 1.0) \
            if spec.aim_learn_s > 0 else 1.0
        residual = spec.aim_residual * (1.0 - learned)
        aim_error *= residual + (1.0 - residual) * fade
        if -1.0 < gap_dist < 8.0:
            # creep up to the mouth; once inside, commit at cruise speed
            v_max = min(v_max, g.careful_speed)
    else:
        wp_x = env.goal_x + 3.0
    wp_y = _cruise_altitude(env) + aim_error
    wp_y = min(max(wp_y, env.layout.y_min + 3.5), env.layout.y_max - 3.5)
    vx_des = min(max(g.kp_pos * (wp_x - state[0]), -v_max), v_max)
    vy_des = min(max(g.kp_pos * (wp_y - state[1]), -g.vy_max), g.vy_max)
    return _track_velocity(spec, state, vx_des, vy_des)


def _adversarial_control(spec: PilotSpec, state: np.ndarray,
                         env: world.Environment, t: float) -> np.ndarray:
    circles, rects, dyn = env.geometry_arrays()
    _, o1, o2, _, _ = _kernels.nearest_obstacle(
        float(state[0]), float(state[1]), t, circles, rects, dyn,
        env.ground_y, 0.0)
    g = spec.gains
    dx, dy = o1 - state[0], o2 - state[1]
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        return np.zeros(2)
    vx_des = g.v_max * dx / dist
    vy_des = g.v_max * dy / dist
    if vy_des < state[4]:
        # wants to descend faster than it is: cut thrust and dive
        u2 = g.k_strafe * (vx_des - state[3]) - g.kp_att * state[2] \
            - g.kd_att * state[5]
        return np.array([0.0, min(max(u2, -1.0), 1.0)])
    return _track_velocity(spec, state, vx_des, vy_des)


def pilot_act(spec: PilotSpec, state: np.ndarray, env: world.Environment,
              t: float, rng: np.random.Generator) -> np.ndarray:
    """Operator command for the observed state.  Deterministic given rng.

    The caller owns the reaction delay: pass the state from ``delay_steps``
    ago.  Noise is drawn from ``rng`` on every call (novice only), so one
    generator per trial reproduces the full input stream.
    """
    if spec.kind is PilotKind.REPLAY:
        idx = int(round(t / spec.replay_dt))
        if 0 <= idx < len(spec.replay_controls):
            return spec.replay_controls[idx].copy()
        return np.zeros(2)

    stress = 1.0
    if spec.kind is PilotKind.NOVICE and spec.stress_gain > 0:
        # novices flail when something is close (ground included)
        circles, rects, dyn = env.geometry_arrays()
        clear, _, _, _, _ = _kernels.nearest_obstacle(
            float(state[0]), float(state[1]), t, circles, rects, dyn,
            env.ground_y, 1.0)
        if clear < spec.stress_range:
            frac = 1.0 - max(clear, 0.0) / spec.stress_range
            stress = 1.0 + spec.stress_gain * frac

    if spec.drift_waves:
        # mis-perceived own position: the craft is flown, stably, to the
        # wrong place; this is the line-holding error of an unpracticed hand
        state = state.copy()
        for axis, amp, freq, phase in spec.drift_waves:
            state[axis] += amp * math.sin(2.0 * math.pi * freq * t + phase)

    if spec.kind is PilotKind.ADVERSARIAL:
        u = _adversarial_control(spec, state, env, t)
    else:
        u = _expert_control(spec, state, env, t)
    for channel, amp, freq, phase in spec.noise_waves:
        u[channel] += stress * amp * math.sin(2.0 * math.pi * freq * t + phase)
    for t0, t1, du1, du2 in spec.spasms:
        if t0 <= t < t1:
            u[0] += du1
            u[1] += du2
            break
    return np.clip(u, -1.0, 1.0)
