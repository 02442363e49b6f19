"""WebSocket telemetry/command service for live operation.

One connected client drives one session.  The wire protocol is JSON text
frames:

client -> server
    {"type": "join", "env": "open|dynamic|narrow", "paradigm": "user-only|shared"}
    {"type": "control", "seq": n, "u": [u1, u2]}
    {"type": "reset"}

server -> client
    {"type": "hello", "session": id, "config_hash": h, "geometry": {...}}
    {"type": "state", "seq": k, "t": t, "x": [6], "u_h": [2], "u_a": [2],
     "applied": [2], "mode": "accept|reject|replace"|null,
     "distance": d, "unsafe": bool, "status": "running|..."}
    {"type": "outcome", "status": s, "crash_reason": r|null, "metrics": {...}}
    {"type": "error", "code": c, "msg": m}

Sequence numbers are monotone; stale control frames (seq <= last seen) are
dropped; unknown fields are ignored.  With ``session.realtime`` the loop
paces to wall-clock at the physics rate and a silent client's last command
is held for ``staleness_steps`` and then decays to zero.  Without realtime
(test mode) the simulation advances in lockstep, one step per control frame,
which makes scripted protocol clients deterministic.

Completed trials are appended to the trajectory log; abandoned ones
(disconnect before a terminal status) are discarded.
"""

from __future__ import annotations

import asyncio
import json
import math
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from . import _kernels, world
from .allocation import Mode, allocate
from .config import LabConfig
from .koopman import KoopmanModel
from .safety import SacContext
from .sessions import (
    _MODE_CODES,
    TrialSeeds,
    Trajectory,
    _classify,
    append_trajectory,
)
from .world import TrialStatus

PROTOCOL_ERR_BAD_JSON = "bad-json"
PROTOCOL_ERR_BAD_FRAME = "bad-frame"
PROTOCOL_ERR_BAD_JOIN = "bad-join"


class _LiveTrial:
    """Mutable per-connection trial state."""

    def __init__(self, config: LabConfig, env_id: str, paradigm: str,
                 model: KoopmanModel | None, seeds: TrialSeeds):
        self.config = config
        self.paradigm = paradigm
        self.filtered = paradigm in ("shared", "il-shared")
        if self.filtered and model is None:
            raise ValueError("shared paradigms require a fitted model")
        self.env = world.make_environment(env_id, config.physics, seeds.env,
                                          config.layout)
        self.seeds = seeds
        self.ctx = SacContext(model, self.env, config.cost, config.physics) \
            if self.filtered else None
        self.circles, self.rects, self.dyn = self.env.geometry_arrays()
        self.phys = world.phys_array(config.physics, self.env.ground_y)
        self.state = self.env.spawn_state.copy()
        self.step_idx = 0
        self.was_unsafe = False
        self.status = TrialStatus.RUNNING
        self.crash_reason = None
        self.rows: list = []

    def advance(self, u_h: np.ndarray) -> dict:
        """Apply one operator command, step physics, return the state frame."""
        cfg = self.config
        t = self.step_idx * cfg.physics.dt
        u_h = np.clip(np.asarray(u_h, dtype=np.float64), -1.0, 1.0)
        clear, _, _, _, _ = _kernels.nearest_obstacle(
            self.state[0], self.state[1], t, self.circles, self.rects,
            self.dyn, self.env.ground_y, cfg.physics.lander_radius)
        dist = max(0.0, float(clear))
        if self.filtered:
            sac = self.ctx.action(self.state, t)
            threshold = cfg.safety.d_safe + (
                cfg.safety.hysteresis if self.was_unsafe else 0.0)
            flag = dist < threshold
            decision = allocate(u_h, sac.u, flag, distance=dist,
                                fallback=sac.fallback)
            applied = decision.applied
            u_a = sac.u
            mode = decision.mode
            self.was_unsafe = flag
        else:
            flag = dist < cfg.safety.d_safe
            applied = u_h
            u_a = None
            mode = None

        self.rows.append((t, self.state.copy(), u_h.copy(),
                          None if u_a is None else u_a.copy(),
                          applied.copy(), mode, dist, flag))
        self.state = _kernels.phys_step(self.state, applied, self.phys)
        self.step_idx += 1
        t_next = self.step_idx * cfg.physics.dt
        self.status, self.crash_reason = _classify(
            self.state, self.env, cfg.physics, t_next,
            self.circles, self.rects, self.dyn)
        # scripted obstacles at the frame time: the client renders these
        # verbatim, it never evaluates the schedule itself
        obs = [[*d.center(t_next), d.radius]
               for d in self.env.dynamic_obstacles]
        return {
            "type": "state",
            "seq": self.step_idx,
            "t": t,
            "x": self.state.tolist(),
            "u_h": u_h.tolist(),
            "u_a": None if u_a is None else u_a.tolist(),
            "applied": applied.tolist(),
            "mode": None if mode is None else mode.value,
            "distance": dist,
            "unsafe": bool(flag),
            "status": self.status.value,
            "obs": obs,
        }

    def to_trajectory(self, source: str) -> Trajectory:
        n = len(self.rows)
        usa = np.full((n, 2), np.nan)
        modes = np.full(n, -1, dtype=np.int8)
        t = np.empty(n)
        xs = np.empty((n, 6))
        usrc = np.empty((n, 2))
        uap = np.empty((n, 2))
        dist = np.empty(n)
        unsafe = np.zeros(n, dtype=bool)
        for k, row in enumerate(self.rows):
            t[k], xs[k], usrc[k], ua, uap[k], mode, dist[k], unsafe[k] = row
            if ua is not None:
                usa[k] = ua
            modes[k] = _MODE_CODES[mode]
        return Trajectory(
            trial_id=uuid.uuid4().hex[:12], env_id=self.env.env_id,
            paradigm=self.paradigm, source=source, seeds=self.seeds,
            config_hash=self.config.config_hash(), dt=self.config.physics.dt,
            t=t, states=xs, u_source=usrc, u_autonomy=usa, applied=uap,
            mode=modes, distance=dist, unsafe=unsafe,
            fallback=np.zeros(n, dtype=bool), final_state=self.state.copy(),
            outcome=self.status, crash_reason=self.crash_reason)

    def outcome_frame(self) -> dict:
        traj = self.to_trajectory("human")
        return {
            "type": "outcome",
            "status": self.status.value,
            "crash_reason": self.crash_reason.value if self.crash_reason else None,
            "metrics": traj.metrics(),
        }


def _error(code: str, msg: str) -> dict:
    return {"type": "error", "code": code, "msg": msg}


def make_app(config: LabConfig | None = None,
             model: KoopmanModel | None = None,
             log_path: str | Path | None = None,
             frontend_dir: str | Path | None = None,
             seed: int = 0) -> FastAPI:
    """Build the service.  Each WebSocket connection runs its own session."""
    config = config or LabConfig()
    app = FastAPI(title="sasclab service")
    session_counter = {"n": seed}

    @app.get("/api/config")
    def get_config():
        return {"config_hash": config.config_hash(),
                "dt": config.physics.dt,
                "d_safe": config.safety.d_safe}

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket):
        await ws.accept()
        try:
            await _run_session(ws)
        except WebSocketDisconnect:
            pass

    async def _run_session(ws: WebSocket):
        # handshake
        while True:
            try:
                raw = await ws.receive_text()
            except WebSocketDisconnect:
                return
            try:
                frame = json.loads(raw)
            except json.JSONDecodeError:
                await ws.send_text(json.dumps(_error(PROTOCOL_ERR_BAD_JSON,
                                                     "not valid JSON")))
                continue
            if frame.get("type") != "join":
                await ws.send_text(json.dumps(_error(
                    PROTOCOL_ERR_BAD_FRAME, "expected a join frame")))
                continue
            try:
                env_id = world.EnvId(frame.get("env", "open"))
                paradigm = frame.get("paradigm", "shared")
                if paradigm not in ("user-only", "shared"):
                    raise ValueError(f"unknown paradigm {paradigm!r}")
                session_counter["n"] += 1
                seeds = TrialSeeds(env=session_counter["n"], pilot=0)
                trial = _LiveTrial(config, env_id, paradigm, model, seeds)
            except ValueError as exc:
                await ws.send_text(json.dumps(_error(PROTOCOL_ERR_BAD_JOIN,
                                                     str(exc))))
                continue
            break

        session_id = uuid.uuid4().hex[:8]
        await ws.send_text(json.dumps({
            "type": "hello",
            "session": session_id,
            "config_hash": config.config_hash(),
            "geometry": trial.env.to_geometry_dict(),
            "d_safe": config.safety.d_safe,
        }))

        dt = config.physics.dt
        staleness = config.session.staleness_steps
        last_u = np.zeros(2)
        last_seq = -1
        last_step_seen = 0

        async def handle_frame(raw: str) -> str | None:
            nonlocal last_u, last_seq, last_step_seen, trial
            try:
                frame = json.loads(raw)
            except json.JSONDecodeError:
                await ws.send_text(json.dumps(_error(PROTOCOL_ERR_BAD_JSON,
                                                     "not valid JSON")))
                return None
            kind = frame.get("type")
            if kind == "control":
                try:
                    seq = int(frame["seq"])
                    u = [float(frame["u"][0]), float(frame["u"][1])]
                    if not (math.isfinite(u[0]) and math.isfinite(u[1])):
                        raise ValueError("non-finite control")
                except (KeyError, TypeError, ValueError, IndexError) as exc:
                    await ws.send_text(json.dumps(_error(
                        PROTOCOL_ERR_BAD_FRAME, f"bad control frame: {exc}")))
                    return None
                if seq > last_seq:
                    last_seq = seq
                    last_u = np.array(u)
                    last_step_seen = trial.step_idx
                return "control"
            if kind == "reset":
                return "reset"
            await ws.send_text(json.dumps(_error(
                PROTOCOL_ERR_BAD_FRAME, f"unknown frame type {kind!r}")))
            return None

        async def finish_trial() -> None:
            await ws.send_text(json.dumps(trial.outcome_frame()))
            if log_path is not None:
                append_trajectory(log_path, trial.to_trajectory("human"))

        def fresh_trial() -> _LiveTrial:
            session_counter["n"] += 1
            return _LiveTrial(config, trial.env.env_id, trial.paradigm, model,
                              TrialSeeds(env=session_counter["n"], pilot=0))

        if config.session.realtime:
            # wall-clock pacing: late frames delay the sim, never skip steps
            loop = asyncio.get_event_loop()
            next_tick = loop.time() + dt
            while True:
                timeout = max(0.0, next_tick - loop.time())
                try:
                    raw = await asyncio.wait_for(ws.receive_text(), timeout)
                    action = await handle_frame(raw)
                    if action == "reset":
                        trial = fresh_trial()
                        last_u = np.zeros(2)
                        last_step_seen = 0
                        next_tick = loop.time() + dt
                    continue
                except asyncio.TimeoutError:
                    pass
                except WebSocketDisconnect:
                    return
                next_tick += dt
                if trial.status.terminal:
                    continue
                if trial.step_idx - last_step_seen > staleness:
                    u_h = np.zeros(2)
                else:
                    u_h = last_u
                await ws.send_text(json.dumps(trial.advance(u_h)))
                if trial.status.terminal:
                    await finish_trial()
        else:
            # lockstep: one simulation step per control frame
            while True:
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    return
                action = await handle_frame(raw)
                if action == "reset":
                    trial = fresh_trial()
                    last_u = np.zeros(2)
                    continue
                if action != "control" or trial.status.terminal:
                    continue
                await ws.send_text(json.dumps(trial.advance(last_u)))
                if trial.status.terminal:
                    await finish_trial()

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        front = Path(frontend_dir)

        @app.get("/")
        def index():
            return FileResponse(front / "index.html")

        app.mount("/", StaticFiles(directory=front), name="cockpit")

    return app


def serve(config: LabConfig, host: str, port: int,
          model: KoopmanModel | None = None,
          log_path: str | Path | None = None,
          frontend_dir: str | Path | None = None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    app = make_app(config, model=model, log_path=log_path,
                   frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
