"""Trial loop, trajectory logging, replay verification and metrics.

A trial advances the world at the fixed timestep, obtaining the operator
command from a scripted pilot, a learned policy or a live client, and either
applies it directly (user-only / il paradigms) or routes it through the
shared-control allocator (shared / il-shared).  Every step is recorded; the
resulting trajectory serializes to one JSON object per line (JSONL) and
re-simulating the logged applied controls from the header seeds reproduces
the state stream bit-exactly.
"""

from __future__ import annotations

import json
import math
import uuid
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, world
from .allocation import Mode, allocate
from .config import LabConfig
from .imitation import PolicyNet, policy_act
from .koopman import KoopmanModel, TransitionDataset
from .pilots import PilotSpec, pilot_act
from .safety import SacContext
from .world import CrashReason, EnvId, TrialStatus

LOG_FORMAT = "sasclab-trajectory"
LOG_VERSION = 1

PARADIGMS = ("user-only", "shared", "il", "il-shared")
FILTERED_PARADIGMS = ("shared", "il-shared")

_MODE_CODES = {None: -1, Mode.ACCEPT: 0, Mode.REJECT: 1, Mode.REPLACE: 2}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


class SchemaMigrationError(RuntimeError):
    """Log schema version does not match this reader."""


class ReplayMismatchError(RuntimeError):
    """Replaying a trajectory failed to reproduce its state stream."""


@dataclass(frozen=True)
class TrialSeeds:
    env: int
    pilot: int

    def to_dict(self) -> dict:
        return {"env": self.env, "pilot": self.pilot}


@dataclass
class Trajectory:
    """One completed trial: header, per-step telemetry, outcome."""

    trial_id: str
    env_id: EnvId
    paradigm: str
    source: str
    seeds: TrialSeeds
    config_hash: str
    dt: float
    t: np.ndarray               # (N,)
    states: np.ndarray          # (N, 6) state at each step start
    u_source: np.ndarray        # (N, 2) operator / policy command
    u_autonomy: np.ndarray      # (N, 2) safety command (NaN when not computed)
    applied: np.ndarray         # (N, 2)
    mode: np.ndarray            # (N,) int8 codes, -1 = unfiltered
    distance: np.ndarray        # (N,) clearance at step start
    unsafe: np.ndarray          # (N,) bool
    fallback: np.ndarray        # (N,) bool
    final_state: np.ndarray     # (6,)
    outcome: TrialStatus
    crash_reason: CrashReason | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def trial_time(self) -> float:
        return float(len(self.t) * self.dt)

    @property
    def path_length(self) -> float:
        pts = np.vstack([self.states[:, :2], self.final_state[:2]])
        return float(np.sum(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))))

    @property
    def final_speed(self) -> float:
        return float(math.hypot(self.final_state[3], self.final_state[4]))

    @property
    def final_heading_deg(self) -> float:
        return float(math.degrees(self.final_state[2]))

    def metrics(self) -> dict:
        return {
            "path_length": self.path_length,
            "trial_time": self.trial_time,
            "final_speed": self.final_speed,
            "final_heading_deg": self.final_heading_deg,
        }

    def to_dict(self) -> dict:
        return {
            "format": LOG_FORMAT,
            "version": LOG_VERSION,
            "trial_id": self.trial_id,
            "env": self.env_id.value,
            "paradigm": self.paradigm,
            "source": self.source,
            "seeds": self.seeds.to_dict(),
            "config_hash": self.config_hash,
            "dt": self.dt,
            "steps": {
                "t": self.t.tolist(),
                "x": self.states.tolist(),
                "u_src": self.u_source.tolist(),
                "u_sa": _nan_to_none(self.u_autonomy),
                "applied": self.applied.tolist(),
                "mode": [None if c < 0 else _CODE_MODES[int(c)].value
                         for c in self.mode],
                "distance": self.distance.tolist(),
                "unsafe": self.unsafe.astype(bool).tolist(),
                "fallback": self.fallback.astype(bool).tolist(),
            },
            "final_state": self.final_state.tolist(),
            "outcome": self.outcome.value,
            "crash_reason": self.crash_reason.value if self.crash_reason else None,
            "metrics": self.metrics(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        if data.get("format") != LOG_FORMAT:
            raise SchemaMigrationError(f"not a trajectory record: {data.get('format')!r}")
        if data.get("version") != LOG_VERSION:
            raise SchemaMigrationError(
                f"log schema version {data.get('version')!r}, reader supports {LOG_VERSION}")
        steps = data["steps"]
        modes = np.array([_MODE_CODES[None] if m is None else _MODE_CODES[Mode(m)]
                          for m in steps["mode"]], dtype=np.int8)
        reason = data.get("crash_reason")
        return cls(
            trial_id=data["trial_id"],
            env_id=EnvId(data["env"]),
            paradigm=data["paradigm"],
            source=data["source"],
            seeds=TrialSeeds(**data["seeds"]),
            config_hash=data["config_hash"],
            dt=float(data["dt"]),
            t=np.asarray(steps["t"], dtype=np.float64),
            states=np.asarray(steps["x"], dtype=np.float64).reshape(-1, 6),
            u_source=np.asarray(steps["u_src"], dtype=np.float64).reshape(-1, 2),
            u_autonomy=_none_to_nan(steps["u_sa"]),
            applied=np.asarray(steps["applied"], dtype=np.float64).reshape(-1, 2),
            mode=modes,
            distance=np.asarray(steps["distance"], dtype=np.float64),
            unsafe=np.asarray(steps["unsafe"], dtype=bool),
            fallback=np.asarray(steps["fallback"], dtype=bool),
            final_state=np.asarray(data["final_state"], dtype=np.float64),
            outcome=TrialStatus(data["outcome"]),
            crash_reason=CrashReason(reason) if reason else None,
        )


def _nan_to_none(arr: np.ndarray):
    return [None if np.isnan(row[0]) else row.tolist() for row in arr]


def _none_to_nan(rows) -> np.ndarray:
    out = np.full((len(rows), 2), np.nan)
    for i, row in enumerate(rows):
        if row is not None:
            out[i] = row
    return out.reshape(-1, 2)


class ControlSource:
    """Adapter from the various command providers to one per-step call."""

    def __init__(self, source, seeds: TrialSeeds, label: str | None = None):
        self.rng = np.random.default_rng(seeds.pilot)
        if isinstance(source, PilotSpec):
            self.kind = "pilot"
            self.spec = source.resolve_trial(self.rng)
            self.label = label or source.kind.value
            self.delay = source.delay_steps
        elif isinstance(source, PolicyNet):
            self.kind = "policy"
            self.net = source
            self.label = label or "policy"
            self.delay = 0
        elif callable(source):
            self.kind = "callable"
            self.fn = source
            self.label = label or "external"
            self.delay = 0
        else:
            raise TypeError(f"unsupported control source {type(source)!r}")

    def act(self, observed_state: np.ndarray, env, t: float) -> np.ndarray:
        if self.kind == "pilot":
            return pilot_act(self.spec, observed_state, env, t, self.rng)
        if self.kind == "policy":
            return policy_act(self.net, observed_state)
        return np.asarray(self.fn(observed_state, t), dtype=np.float64)


def run_trial(env_id: EnvId | str, paradigm: str, control_source,
              seeds: TrialSeeds, config: LabConfig,
              model: KoopmanModel | None = None,
              source_label: str | None = None) -> Trajectory:
    """Run one trial to a terminal status and return its trajectory.

    ``control_source`` is a PilotSpec, a PolicyNet, or a callable
    ``(state, t) -> u``.  Shared paradigms require the learned model.
    Reaction delay (pilots only) is realized here by feeding the pilot the
    state from ``delay_steps`` ago.
    """
    if paradigm not in PARADIGMS:
        raise ValueError(f"unknown paradigm {paradigm!r}")
    filtered = paradigm in FILTERED_PARADIGMS
    if filtered and model is None:
        raise ValueError(f"paradigm {paradigm!r} requires a fitted model")

    physics = config.physics
    env = world.make_environment(env_id, physics, seeds.env, config.layout)
    source = ControlSource(control_source, seeds, source_label)
    ctx = SacContext(model, env, config.cost, physics) if filtered else None
    circles, rects, dyn = env.geometry_arrays()
    phys = world.phys_array(physics, env.ground_y)
    d_safe = config.safety.d_safe
    hysteresis = config.safety.hysteresis
    dt = physics.dt
    max_steps = int(physics.trial_timeout / dt) + 2

    cap = max_steps
    ts = np.empty(cap)
    xs = np.empty((cap, 6))
    usrc = np.empty((cap, 2))
    usa = np.full((cap, 2), np.nan)
    uap = np.empty((cap, 2))
    modes = np.full(cap, -1, dtype=np.int8)
    dists = np.empty(cap)
    unsafe = np.zeros(cap, dtype=bool)
    fallback = np.zeros(cap, dtype=bool)

    state = env.spawn_state.copy()
    obs_buffer: deque = deque([state], maxlen=source.delay + 1)
    was_unsafe = False
    outcome = TrialStatus.TIMEOUT
    reason: CrashReason | None = None
    n = 0
    for k in range(max_steps):
        t = k * dt
        observed = obs_buffer[0]
        u_src = np.clip(source.act(observed, env, t), -1.0, 1.0)

        clear, _, _, _, _ = _kernels.nearest_obstacle(
            state[0], state[1], t, circles, rects, dyn, env.ground_y,
            physics.lander_radius)
        dist = max(0.0, float(clear))
        if filtered:
            sac = ctx.action(state, t)
            threshold = d_safe + (hysteresis if was_unsafe else 0.0)
            flag = dist < threshold
            decision = allocate(u_src, sac.u, flag, distance=dist,
                                fallback=sac.fallback)
            applied = decision.applied
            usa[k] = sac.u
            modes[k] = _MODE_CODES[decision.mode]
            fallback[k] = sac.fallback
            was_unsafe = flag
        else:
            flag = dist < d_safe
            applied = u_src

        ts[k] = t
        xs[k] = state
        usrc[k] = u_src
        uap[k] = applied
        dists[k] = dist
        unsafe[k] = flag
        n = k + 1

        state = _kernels.phys_step(state, applied, phys)
        obs_buffer.append(state)
        status, reason = _classify(state, env, physics, (k + 1) * dt,
                                   circles, rects, dyn)
        if status.terminal:
            outcome = status
            break

    return Trajectory(
        trial_id=uuid.uuid4().hex[:12],
        env_id=env.env_id,
        paradigm=paradigm,
        source=source.label,
        seeds=seeds,
        config_hash=config.config_hash(),
        dt=dt,
        t=ts[:n].copy(),
        states=xs[:n].copy(),
        u_source=usrc[:n].copy(),
        u_autonomy=usa[:n].copy(),
        applied=uap[:n].copy(),
        mode=modes[:n].copy(),
        distance=dists[:n].copy(),
        unsafe=unsafe[:n].copy(),
        fallback=fallback[:n].copy(),
        final_state=state.copy(),
        outcome=outcome,
        crash_reason=reason,
    )


def _classify(state, env, physics, elapsed, circles, rects, dyn):
    """Lean in-loop version of world.classify_outcome (same contract)."""
    if state[0] >= env.goal_x and env.goal_y0 <= state[1] <= env.goal_y1:
        return TrialStatus.SUCCESS, None
    _, _, _, obst_clear, ground_clear = _kernels.nearest_obstacle(
        state[0], state[1], elapsed, circles, rects, dyn, env.ground_y,
        physics.lander_radius)
    if obst_clear <= 0.0:
        return TrialStatus.CRASH, CrashReason.OBSTACLE
    if ground_clear <= 1e-9:
        speed = math.hypot(state[3], state[4])
        if speed > physics.max_impact_speed or abs(state[2]) > physics.max_landing_tilt:
            return TrialStatus.CRASH, CrashReason.GROUND
    x_min, x_max, y_min, y_max = env.bounds
    if not (x_min <= state[0] <= x_max and y_min <= state[1] <= y_max):
        return TrialStatus.CRASH, CrashReason.OUT_OF_BOUNDS
    if elapsed > physics.trial_timeout:
        return TrialStatus.TIMEOUT, None
    return TrialStatus.RUNNING, None


# --- JSONL log ---------------------------------------------------------------


def append_trajectory(log_path: str | Path, trajectory: Trajectory) -> None:
    """Append one trajectory as a single JSON line."""
    path = Path(log_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(json.dumps(trajectory.to_dict()) + "\n")


def iter_trajectories(log_paths) -> list[Trajectory]:
    """Read trajectories from one or more JSONL logs.

    A truncated final line (interrupted writer) is skipped with a warning;
    a schema version mismatch is an explicit error.
    """
    if isinstance(log_paths, (str, Path)):
        log_paths = [log_paths]
    out = []
    for path in log_paths:
        with open(path) as fh:
            lines = fh.readlines()
        for i, line in enumerate(lines):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    warnings.warn(f"{path}: skipping truncated final line")
                    continue
                raise
            out.append(Trajectory.from_dict(data))
    return out


def filter_trajectories(trajectories, env_id=None, paradigm=None,
                        outcome=None, source=None) -> list[Trajectory]:
    sel = []
    for tr in trajectories:
        if env_id is not None and tr.env_id is not EnvId(env_id):
            continue
        if paradigm is not None and tr.paradigm != paradigm:
            continue
        if outcome is not None and tr.outcome is not TrialStatus(outcome):
            continue
        if source is not None and tr.source != source:
            continue
        sel.append(tr)
    return sel


def transitions_from_trajectories(trajectories) -> TransitionDataset:
    """(x_k, applied_k, x_{k+1}) triples; N steps yield N-1 transitions."""
    states, controls, nxt, sources = [], [], [], []
    dts = {round(tr.dt, 12) for tr in trajectories}
    if len(dts) > 1:
        raise ValueError(f"trajectories mix timesteps: {sorted(dts)}")
    for tr in trajectories:
        if len(tr) < 2:
            continue
        states.append(tr.states[:-1])
        controls.append(tr.applied[:-1])
        nxt.append(tr.states[1:])
        sources.extend((tr.trial_id, k) for k in range(len(tr) - 1))
    if not states:
        raise ValueError("no transitions in the given trajectories")
    return TransitionDataset(states=np.concatenate(states),
                             controls=np.concatenate(controls),
                             next_states=np.concatenate(nxt),
                             dt=trajectories[0].dt,
                             sources=tuple(sources))


def replay_trajectory(trajectory: Trajectory, config: LabConfig,
                      strict_hash: bool = True) -> bool:
    """Re-simulate the logged applied controls; verify bit-exact states.

    Raises ReplayMismatchError on any deviation.  This is the ground truth
    for determinism: it exercises environment reconstruction from seeds and
    the physics step, nothing else.
    """
    if strict_hash and trajectory.config_hash != config.config_hash():
        raise ReplayMismatchError(
            f"config hash {config.config_hash()} does not match the log's "
            f"{trajectory.config_hash}")
    env = world.make_environment(trajectory.env_id, config.physics,
                                 trajectory.seeds.env, config.layout)
    phys = world.phys_array(config.physics, env.ground_y)
    state = env.spawn_state.copy()
    for k in range(len(trajectory)):
        if not np.array_equal(state, trajectory.states[k]):
            raise ReplayMismatchError(f"state mismatch at step {k}")
        state = _kernels.phys_step(state, trajectory.applied[k], phys)
    if not np.array_equal(state, trajectory.final_state):
        raise ReplayMismatchError("final state mismatch")
    return True


# --- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    """Aggregate over one (environment, paradigm) group.

    Trajectory features are computed over Success trials only; with zero
    successes they are reported as absent (None), never as zero.
    """

    env_id: str
    paradigm: str
    n_trials: int
    n_success: int
    success_fraction: float
    path_length: tuple | None        # (mean, sd)
    trial_time: tuple | None
    final_speed: tuple | None
    final_heading_deg: tuple | None  # of |heading|

    def to_dict(self) -> dict:
        def pair(v):
            return None if v is None else {"mean": v[0], "sd": v[1]}
        return {
            "env": self.env_id, "paradigm": self.paradigm,
            "n_trials": self.n_trials, "n_success": self.n_success,
            "success_fraction": self.success_fraction,
            "path_length": pair(self.path_length),
            "trial_time": pair(self.trial_time),
            "final_speed": pair(self.final_speed),
            "final_heading_deg": pair(self.final_heading_deg),
        }


def _mean_sd(values) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def compute_metrics(trajectories) -> list[MetricsRow]:
    """Per (env, paradigm) success fraction and trajectory features."""
    if not trajectories:
        raise ValueError("compute_metrics needs at least one trajectory")
    groups: dict[tuple, list[Trajectory]] = {}
    for tr in trajectories:
        groups.setdefault((tr.env_id.value, tr.paradigm), []).append(tr)
    rows = []
    for (env_id, paradigm), group in sorted(groups.items()):
        wins = [tr for tr in group if tr.outcome is TrialStatus.SUCCESS]
        if wins:
            row = MetricsRow(
                env_id=env_id, paradigm=paradigm,
                n_trials=len(group), n_success=len(wins),
                success_fraction=len(wins) / len(group),
                path_length=_mean_sd([tr.path_length for tr in wins]),
                trial_time=_mean_sd([tr.trial_time for tr in wins]),
                final_speed=_mean_sd([tr.final_speed for tr in wins]),
                final_heading_deg=_mean_sd([abs(tr.final_heading_deg)
                                            for tr in wins]),
            )
        else:
            row = MetricsRow(env_id=env_id, paradigm=paradigm,
                             n_trials=len(group), n_success=0,
                             success_fraction=0.0, path_length=None,
                             trial_time=None, final_speed=None,
                             final_heading_deg=None)
        rows.append(row)
    return rows


def format_metrics_table(rows) -> str:
    """Plain-text table, one row per (env, paradigm) group."""
    header = (f"{'env':<9}{'paradigm':<11}{'trials':>7}{'success':>9}"
              f"{'path (m)':>16}{'time (s)':>16}{'speed (m/s)':>16}"
              f"{'|heading| (deg)':>17}")
    lines = [header, "-" * len(header)]
    for r in rows:
        def fmt(v):
            return "--" if v is None else f"{v[0]:.1f} +/- {v[1]:.1f}"
        lines.append(
            f"{r.env_id:<9}{r.paradigm:<11}{r.n_trials:>7}"
            f"{r.success_fraction:>9.2f}{fmt(r.path_length):>16}"
            f"{fmt(r.trial_time):>16}{fmt(r.final_speed):>16}"
            f"{fmt(r.final_heading_deg):>17}")
    return "\n".join(lines)
