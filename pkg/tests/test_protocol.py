"""Scripted protocol client: drives full trials through the service.

Uses the lockstep mode (realtime off): the simulation advances exactly one
step per control frame, so the exchange is deterministic.
"""

from __future__ import annotations

import dataclasses
import json

import pytest
from fastapi.testclient import TestClient

from sasclab.config import LabConfig, SessionParams
from sasclab.server import make_app


@pytest.fixture(scope="module")
def lockstep_config():
    return LabConfig(session=SessionParams(realtime=False))


@pytest.fixture(scope="module")
def client(lockstep_config, fitted_model):
    app = make_app(lockstep_config, model=fitted_model)
    with TestClient(app) as c:
        yield c


def send(ws, **frame):
    ws.send_text(json.dumps(frame))


def recv(ws) -> dict:
    return json.loads(ws.receive_text())


def test_join_handshake_and_state_stream(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="shared")
        hello = recv(ws)
        assert hello["type"] == "hello"
        assert hello["config_hash"]
        assert hello["geometry"]["env"] == "open"
        last_seq = 0
        for k in range(30):
            send(ws, type="control", seq=k, u=[0.5, 0.0])
            frame = recv(ws)
            assert frame["type"] == "state"
            assert frame["seq"] == last_seq + 1
            last_seq = frame["seq"]
            assert len(frame["x"]) == 6
            assert frame["mode"] in ("accept", "reject", "replace")
            assert frame["status"] in ("running", "success", "crash", "timeout")
            assert isinstance(frame["distance"], float)


def test_full_trial_reaches_outcome(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="user-only")
        recv(ws)
        outcome = None
        for k in range(1000):
            send(ws, type="control", seq=k, u=[0.0, 0.0])  # free fall
            frame = recv(ws)
            if frame["status"] != "running":
                outcome = recv(ws)
                break
        assert outcome is not None
        assert outcome["type"] == "outcome"
        assert outcome["status"] == "crash"
        assert outcome["crash_reason"] == "ground impact"
        assert "final_speed" in outcome["metrics"]


def test_mode_passes_through_replace(client):
    """Drive the craft into the unsafe shell: the frame must say replace."""
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="shared")
        recv(ws)
        modes = []
        for k in range(600):
            send(ws, type="control", seq=k, u=[0.0, 0.0])
            frame = recv(ws)
            modes.append(frame["mode"])
            if frame["status"] != "running":
                break
        assert "replace" in modes  # the drop trips the clearance flag


def test_stale_and_duplicate_seqs_dropped(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="user-only")
        recv(ws)
        send(ws, type="control", seq=5, u=[1.0, 0.0])
        f1 = recv(ws)
        # stale frame: the applied command must remain the seq-5 one
        send(ws, type="control", seq=4, u=[-1.0, -1.0])
        f2 = recv(ws)
        assert f2["u_h"] == f1["u_h"] == [1.0, 0.0]


def test_malformed_frames_yield_error_and_survive(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="user-only")
        recv(ws)
        ws.send_text("this is not json")
        err = recv(ws)
        assert err["type"] == "error" and err["code"] == "bad-json"
        send(ws, type="warp", factor=9)
        err = recv(ws)
        assert err["type"] == "error" and err["code"] == "bad-frame"
        send(ws, type="control", seq=0, u=[0.2, 0.0])
        assert recv(ws)["type"] == "state"


def test_unknown_paradigm_rejected_at_join(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="autopilot")
        err = recv(ws)
        assert err["type"] == "error" and err["code"] == "bad-join"
        send(ws, type="join", env="open", paradigm="user-only")
        assert recv(ws)["type"] == "hello"


def test_reset_starts_fresh_trial(client):
    with client.websocket_connect("/ws") as ws:
        send(ws, type="join", env="open", paradigm="user-only")
        recv(ws)
        for k in range(10):
            send(ws, type="control", seq=k, u=[1.0, 0.5])
            recv(ws)
        send(ws, type="reset")
        send(ws, type="control", seq=100, u=[0.0, 0.0])
        frame = recv(ws)
        assert frame["seq"] == 1  # step counter restarted


def test_sessions_are_independent(client):
    with client.websocket_connect("/ws") as a, \
            client.websocket_connect("/ws") as b:
        send(a, type="join", env="open", paradigm="user-only")
        ha = recv(a)
        send(b, type="join", env="narrow", paradigm="user-only")
        hb = recv(b)
        assert ha["session"] != hb["session"]
        assert ha["geometry"]["env"] == "open"
        assert hb["geometry"]["env"] == "narrow"
        send(a, type="control", seq=0, u=[1.0, 0.0])
        send(b, type="control", seq=0, u=[0.0, 0.0])
        fa, fb = recv(a), recv(b)
        assert fa["seq"] == 1 and fb["seq"] == 1
        assert fa["x"] != fb["x"]


def test_completed_trials_are_logged(lockstep_config, fitted_model, tmp_path):
    from sasclab import sessions
    log = tmp_path / "served.jsonl"
    app = make_app(lockstep_config, model=fitted_model, log_path=log)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            send(ws, type="join", env="open", paradigm="user-only")
            recv(ws)
            for k in range(1000):
                send(ws, type="control", seq=k, u=[0.0, 0.0])
                frame = recv(ws)
                if frame["status"] != "running":
                    recv(ws)
                    break
    trajs = sessions.iter_trajectories(log)
    assert len(trajs) == 1
    assert trajs[0].source == "human"
    assert trajs[0].outcome.value == "crash"
    # served trials replay exactly like headless ones
    assert sessions.replay_trajectory(trajs[0], lockstep_config)


def test_abandoned_trials_not_logged(lockstep_config, fitted_model, tmp_path):
    log = tmp_path / "served.jsonl"
    app = make_app(lockstep_config, model=fitted_model, log_path=log)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            send(ws, type="join", env="open", paradigm="user-only")
            recv(ws)
            send(ws, type="control", seq=0, u=[0.5, 0.0])
            recv(ws)
            # disconnect mid-trial
    assert not log.exists()
