import json

import pytest
from starlette.testclient import TestClient

from balancelab.engine import SessionConfig
from balancelab.server import create_app
from balancelab.trial import load


def make_app(tmp_path, **kw):
    kw.setdefault("mode", "single")
    kw.setdefault("max_duration", 0.2)
    kw.setdefault("countdown", 1)
    kw.setdefault("session_code", "abc")
    config = SessionConfig(**kw)
    return create_app(config, tmp_path), config


def drain(ws):
    """Read frames until the end message; returns (countdowns, states, end)."""
    countdowns, states, end = [], [], None
    while True:
        msg = json.loads(ws.receive_text())
        if msg["type"] == "countdown":
            countdowns.append(msg["n"])
        elif msg["type"] == "state":
            states.append(msg)
        elif msg["type"] == "end":
            end = msg
            break
    return countdowns, states, end


def test_config_endpoint(tmp_path):
    app, config = make_app(tmp_path)
    with TestClient(app) as client:
        got = client.get("/config").json()
    assert got["mode"] == "single"
    assert got["session_code"] == "abc"
    assert got["params"]["gamma"] == 50.0


def test_single_session_runs_to_completion(tmp_path):
    app, config = make_app(tmp_path)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "subject": 1,
                                     "session": "abc"}))
            countdowns, states, end = drain(ws)
    assert countdowns == [1]
    assert end["cause"] == "completed"
    assert len(states) == config.max_ticks
    assert states[0]["tick"] == 0
    assert states[-1]["tick"] == config.max_ticks - 1
    assert all("thick" in s and "thin" in s for s in states)

    files = list(tmp_path.glob("abc-*.trial.jsonl"))
    assert len(files) == 1
    rec = load(files[0])
    assert rec.termination_cause == "completed"
    assert len(rec.rows) == config.max_ticks
    assert not rec.truncated


def test_wrong_session_code_rejected(tmp_path):
    app, _ = make_app(tmp_path)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "subject": 1,
                                     "session": "nope"}))
            with pytest.raises(Exception):
                ws.receive_text()


def test_bad_subject_rejected(tmp_path):
    app, _ = make_app(tmp_path)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "subject": 5,
                                     "session": "abc"}))
            with pytest.raises(Exception):
                ws.receive_text()


def test_mouse_input_moves_base(tmp_path):
    app, config = make_app(tmp_path, max_duration=1.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "subject": 1,
                                     "session": "abc"}))
            sent = False
            while True:
                msg = json.loads(ws.receive_text())
                if msg["type"] == "state":
                    if not sent:
                        ws.send_text(json.dumps({"type": "mouse",
                                                 "tick": msg["tick"],
                                                 "px": 900}))
                        sent = True
                elif msg["type"] == "end":
                    break
    files = list(tmp_path.glob("abc-*.trial.jsonl"))
    rec = load(files[0])
    pxs = {row["px"][0] for row in rec.rows}
    assert 900 in pxs


def test_abort_flushes_trial(tmp_path):
    app, config = make_app(tmp_path, max_duration=10.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "subject": 1,
                                     "session": "abc"}))
            n = 0
            while True:
                msg = json.loads(ws.receive_text())
                if msg["type"] == "state":
                    n += 1
                    if n == 3:
                        ws.send_text(json.dumps({"type": "abort"}))
                elif msg["type"] == "end":
                    assert msg["cause"] == "aborted-by-subject"
                    break
    rec = load(list(tmp_path.glob("abc-*.trial.jsonl"))[0])
    assert rec.termination_cause == "aborted-by-subject"
    assert 0 < len(rec.rows) < 20


def test_coupled_requires_both_subjects(tmp_path):
    app, config = make_app(tmp_path, mode="coupled", max_duration=0.1)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws1:
            ws1.send_text(json.dumps({"type": "hello", "subject": 1,
                                      "session": "abc"}))
            with client.websocket_connect("/ws") as ws2:
                ws2.send_text(json.dumps({"type": "hello", "subject": 2,
                                          "session": "abc"}))
                c1, s1, e1 = drain(ws1)
                c2, s2, e2 = drain(ws2)
    assert e1["cause"] == "completed" and e2["cause"] == "completed"
    assert len(s1) == len(s2) == config.max_ticks
    # coupled frames carry two thick and two thin pixel positions
    assert len(s1[0]["thick"]) == 2
    assert len(s1[0]["thin"]) == 2


def test_duplicate_subject_rejected(tmp_path):
    app, _ = make_app(tmp_path, mode="coupled", max_duration=0.1)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws1:
            ws1.send_text(json.dumps({"type": "hello", "subject": 1,
                                      "session": "abc"}))
            with client.websocket_connect("/ws") as dup:
                dup.send_text(json.dumps({"type": "hello", "subject": 1,
                                          "session": "abc"}))
                with pytest.raises(Exception):
                    dup.receive_text()
