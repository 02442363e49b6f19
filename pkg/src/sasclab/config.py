"""Configuration tree for the shared-control lab.

Every tunable quantity lives in one of the dataclasses below.  The whole tree
serializes to / loads from a YAML key-value file (see ``configs/example.yaml``)
and hashes to a stable ``config_hash`` that is stamped into every trajectory
log so replays can detect configuration drift.

All defaults are engineering choices, documented here, not physical claims.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


@dataclass(frozen=True)
class PhysicsParams:
    """Rigid-body constants for the planar lander.

    The craft is a point mass with rotational inertia.  The main thruster
    pushes along the body-up axis (only for throttle > 0); the rotational
    thruster applies a pure torque plus a small lateral force along the
    body-right axis, the way reaction-control jets translate a craft.
    """

    dt: float = 1.0 / 60.0            # s, fixed integration step
    gravity: float = 1.62             # m/s^2, lunar surface
    mass: float = 1.0                 # kg
    inertia: float = 0.1              # kg m^2
    main_thrust_max: float = 3.24     # N; 2*mass*gravity, hover at half throttle
    side_thrust_max: float = 0.4      # N m, pure torque at full deflection
    side_force_max: float = 1.8       # N, lateral jet force at full deflection
    lander_radius: float = 1.0        # m, bounding circle
    max_impact_speed: float = 2.0     # m/s, faster ground contact is a crash
    max_landing_tilt: float = 0.4     # rad, larger tilt at contact is a crash
    trial_timeout: float = 60.0       # s

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        for name in ("gravity", "mass", "inertia", "main_thrust_max",
                     "side_thrust_max", "lander_radius", "max_impact_speed",
                     "max_landing_tilt", "trial_timeout"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.side_force_max < 0:
            raise ConfigError("side_force_max must be non-negative")


@dataclass(frozen=True)
class EnvLayout:
    """World geometry shared by the three experimental environments.

    The goal is a vertical segment near the right edge; a trial completes
    when the lander's center crosses it moving in +x.  The narrow-passage
    walls and the scripted crossing obstacle are parameterized here so the
    same layout feeds the physics, the safety filter, and the cockpit.
    """

    x_min: float = -8.0
    x_max: float = 45.0
    y_min: float = 0.0
    y_max: float = 42.0
    ground_y: float = 0.0
    spawn_x: float = 5.0
    spawn_y: float = 6.0              # also the crossing altitude in dynamic
    spawn_jitter: float = 0.25        # m, uniform box jitter applied per seed
    goal_x: float = 33.0
    goal_y0: float = 0.0
    goal_y1: float = 42.0
    # narrow passage: two overhead slabs (a slit apart) forcing a low slot
    # between ceiling and ground; under-flight keeps every worst-case
    # approach gravity-brakeable, which the safety filter needs
    wall_x0: float = 20.0
    wall_x1: float = 28.0
    ceiling_y: float = 9.0
    slit_width: float = 0.4
    # scripted crossing obstacle (dynamic environment)
    obstacle_radius: float = 0.8
    obstacle_speed: float = 1.0       # m/s, left to right
    obstacle_margin: float = 2.0      # m past each edge before wrap
    spawn_clearance_min: float = 6.0  # m, obstacle center kept this far from spawn at t=0

    def validate(self) -> None:
        if not (self.x_min < self.goal_x < self.x_max):
            raise ConfigError("goal_x must lie inside world bounds")
        if not (self.y_min <= self.ground_y < self.y_max):
            raise ConfigError("ground_y must lie inside world bounds")
        if not (self.ground_y < self.ceiling_y < self.y_max):
            raise ConfigError("passage ceiling must sit between ground and sky")
        if not (self.wall_x0 < self.wall_x1):
            raise ConfigError("passage slabs must have positive width")
        if self.obstacle_radius <= 0 or self.obstacle_speed <= 0:
            raise ConfigError("obstacle radius and speed must be positive")


@dataclass(frozen=True)
class SafetyCostParams:
    """Weights of the safety-only objective.

    The running cost is a stabilization quadratic over heading, the linear
    velocities and the spin rate, plus an obstacle barrier.  The default
    barrier is the repulsive inverse form scale/(eps + d^2)^(p/2) where d is
    the planar distance to the nearest obstacle's reference point; its value
    saturates at scale/eps^(p/2) at the obstacle center, so no infinities are
    emitted.  The ascending polynomial form (dx^p + dy^p), which grows with
    distance, is kept behind ``barrier_form`` for fidelity experiments.
    """

    w3: float = 15.0
    w4: float = 1.0
    w5: float = 1.0
    w6: float = 10.0
    barrier_scale: float = 2.0e6
    barrier_eps: float = 1.0
    barrier_exponent: int = 8
    barrier_form: str = "inverse"     # "inverse" | "ascending"
    control_weight: tuple = ((40.0, 0.0), (0.0, 40.0))  # R, must be SPD
    horizon_s: float = 1.0
    terminal_weight: float = 1.0
    action_threshold: float = 10.0    # required predicted-cost margin to act

    def validate(self) -> None:
        if self.barrier_exponent <= 0 or self.barrier_exponent % 2 != 0:
            raise ConfigError("barrier_exponent must be a positive even integer")
        if self.barrier_form not in ("inverse", "ascending"):
            raise ConfigError("barrier_form must be 'inverse' or 'ascending'")
        r = np.asarray(self.control_weight, dtype=float)
        if r.shape != (2, 2) or not np.allclose(r, r.T):
            raise ConfigError("control_weight must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(r) <= 0):
            raise ConfigError("control_weight must be positive definite")
        if self.horizon_s <= 0:
            raise ConfigError("horizon_s must be positive")
        if self.action_threshold < 0:
            raise ConfigError("action_threshold must be non-negative")

    def r_inverse(self) -> np.ndarray:
        return np.linalg.inv(np.asarray(self.control_weight, dtype=float))


@dataclass(frozen=True)
class SafetyConfig:
    """Unsafe-region predicate: clearance below d_safe trips the filter."""

    d_safe: float = 2.2               # m of clearance; see decisions ledger
    hysteresis: float = 0.0           # extra clearance required to re-arm the operator

    def validate(self) -> None:
        if self.d_safe <= 0:
            raise ConfigError("d_safe must be positive")
        if self.hysteresis < 0:
            raise ConfigError("hysteresis must be non-negative")


@dataclass(frozen=True)
class PilotGains:
    """PD gain set shared by the scripted operators."""

    kp_pos: float = 0.55              # desired speed per meter of position error
    v_max: float = 2.5                # m/s horizontal speed clamp
    vy_max: float = 2.0               # m/s vertical speed clamp
    kd_vel: float = 1.6               # accel per m/s of horizontal speed error
    kd_alt: float = 2.4               # accel per m/s of vertical speed error
    kp_att: float = 8.0               # u2 per rad of tilt error
    kd_att: float = 1.6               # u2 per rad/s of spin
    k_strafe: float = 0.5             # u2 per m/s of lateral speed error
    tilt_max: float = 0.25            # rad, commanded tilt clamp
    careful_speed: float = 1.2        # m/s approach clamp near the passage

    def scaled(self, factor: float) -> "PilotGains":
        """Uniformly detuned copy (position/attitude loops only)."""
        return dataclasses.replace(
            self,
            kp_pos=self.kp_pos * factor,
            kp_att=self.kp_att * factor,
        )


@dataclass(frozen=True)
class NoviceParams:
    """Skill handicap of the surrogate novice.

    The novice runs the expert law with detuned gains, a reaction delay (it
    acts on stale state), fast seeded input jitter, a slow perceived-position
    wander, and a per-trial altitude aim error that it corrects over the
    trial clock.  The defaults are tuned so user-only flight fails roughly
    half the time in open air and almost always in the passage, while the
    same inputs under shared control stay recoverable everywhere.
    """

    gain_scale: float = 1.8
    noise_amp: float = 0.1
    drift_amp: float = 3.2
    delay_steps: int = 9
    aim_sigma: float = 3.5
    aim_residual: float = 0.0
    aim_learn_s: float = 20.0
    stress_gain: float = 2.0
    spasm_interval: float = 0.0

    def validate(self) -> None:
        if self.noise_amp < 0 or self.delay_steps < 0:
            raise ConfigError("noise_amp and delay_steps must be non-negative")
        if self.drift_amp < 0 or self.aim_sigma < 0:
            raise ConfigError("drift_amp and aim_sigma must be non-negative")


@dataclass(frozen=True)
class TrainParams:
    """Behavior-cloning hyperparameters."""

    learning_rate: float = 1e-3
    decay: float = 0.9                # RMSProp accumulator factor
    batch_size: int = 32
    epochs: int = 500
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size <= 0 or self.epochs <= 0:
            raise ConfigError("batch_size and epochs must be positive")
        if not (0.0 <= self.decay < 1.0):
            raise ConfigError("decay must be in [0, 1)")


@dataclass(frozen=True)
class SessionParams:
    """Trial-loop and telemetry service settings."""

    staleness_steps: int = 9          # hold a stale remote command this many steps, then zero
    realtime: bool = True             # pace served sessions to wall-clock 60 Hz
    ridge: float = 1e-6               # default Koopman ridge regularization

    def validate(self) -> None:
        if self.staleness_steps < 0:
            raise ConfigError("staleness_steps must be non-negative")
        if self.ridge < 0:
            raise ConfigError("ridge must be non-negative")


@dataclass(frozen=True)
class LabConfig:
    """Root of the configuration tree."""

    physics: PhysicsParams = field(default_factory=PhysicsParams)
    layout: EnvLayout = field(default_factory=EnvLayout)
    cost: SafetyCostParams = field(default_factory=SafetyCostParams)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    gains: PilotGains = field(default_factory=PilotGains)
    novice: NoviceParams = field(default_factory=NoviceParams)
    train: TrainParams = field(default_factory=TrainParams)
    session: SessionParams = field(default_factory=SessionParams)

    def validate(self) -> None:
        for section in ("physics", "layout", "cost", "safety", "novice",
                        "train", "session"):
            sub = getattr(self, section)
            if hasattr(sub, "validate"):
                sub.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Stable short hash of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_SECTIONS = {
    "physics": PhysicsParams,
    "layout": EnvLayout,
    "cost": SafetyCostParams,
    "safety": SafetyConfig,
    "gains": PilotGains,
    "novice": NoviceParams,
    "train": TrainParams,
    "session": SessionParams,
}


def _build_section(cls, data: dict, path: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{path}.{key}'")
        if key == "control_weight":
            value = tuple(tuple(float(v) for v in row) for row in value)
        else:
            # coerce scalars to the declared type; catches YAML artifacts
            # like `2.0e6` (no exponent sign) parsing as a string
            default = known[key].default
            try:
                if isinstance(default, bool):
                    if not isinstance(value, bool):
                        raise ConfigError(f"'{path}.{key}' must be a boolean")
                elif isinstance(default, int) and not isinstance(value, bool):
                    value = int(value)
                elif isinstance(default, float):
                    value = float(value)
                elif isinstance(default, str):
                    value = str(value)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"'{path}.{key}' has the wrong type: {value!r}") from None
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> LabConfig:
    """Build a LabConfig from a (possibly partial) nested dict."""
    kwargs = {}
    for key, value in (data or {}).items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section '{key}'")
        if not isinstance(value, dict):
            raise ConfigError(f"section '{key}' must be a mapping")
        kwargs[key] = _build_section(_SECTIONS[key], value, key)
    cfg = LabConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> LabConfig:
    """Load a YAML config file and apply ``section.key=value`` overrides.

    Missing file sections fall back to defaults.  Override values are parsed
    as YAML scalars, so ``safety.d_safe=2.5`` and ``session.realtime=false``
    both work.
    """
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        data = loaded
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like section.key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key '{dotted}' must be section.key")
        section, key = parts
        data.setdefault(section, {})[key] = yaml.safe_load(raw)
    return config_from_dict(data)
