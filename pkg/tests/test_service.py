"""Live session host: sans-IO session manager and the websocket transport."""

import json

import pytest

from tomcom.harness import HarnessParams
from tomcom.service import (
    Session,
    SessionConfig,
    SessionError,
    SessionManager,
    client_config,
    create_app,
)

FAST = HarnessParams(tracker_samples=16, comm_rollouts=2, comm_horizon=3, n_rollout_samples=2)


def _manager(**overrides):
    kwargs = {"config": "reduced", "ticks": 5, "params": FAST, **overrides}
    return SessionManager(SessionConfig(**kwargs))


def test_client_config_has_render_vocabulary(reduced):
    cc = client_config(reduced)
    assert set(cc["aspects"]) == set(reduced.aspects)
    assert set(cc["ingredients"]) == set(reduced.ingredients)
    assert set(cc["recipes"]) == set(reduced.recipes)
    json.dumps(cc)  # must be wire-serializable


def test_open_session_sends_hello_then_state():
    mgr = _manager()
    sid, out = mgr.open_session()
    assert [m["type"] for m in out] == ["hello", "state_update"]
    assert all(m["session"] == sid for m in out)
    update = out[1]["payload"]
    assert "state" in update and update["legal_actions"]


def test_bad_concept_raises_bad_config():
    with pytest.raises(SessionError) as exc:
        Session("s1", SessionConfig(concept="wizard"))
    assert exc.value.code == "BAD_CONFIG"


def test_bad_config_name_raises_bad_config():
    with pytest.raises(SessionError) as exc:
        Session("s1", SessionConfig(config="nonexistent"))
    assert exc.value.code == "BAD_CONFIG"


def test_unknown_session_is_rejected():
    mgr = _manager()
    with pytest.raises(SessionError) as exc:
        mgr.step_session("nope")
    assert exc.value.code == "UNKNOWN_SESSION"


def test_malformed_action_returns_bad_action_error():
    mgr = _manager()
    sid, _ = mgr.open_session()
    out = mgr.client_message(sid, {"type": "human_action", "payload": {"action": "garbage"}})
    assert out[0]["type"] == "error"
    assert out[0]["payload"]["code"] == "BAD_ACTION"


def test_unexpected_message_type_raises_bad_message():
    mgr = _manager()
    sid, _ = mgr.open_session()
    with pytest.raises(SessionError) as exc:
        mgr.client_message(sid, {"type": "launch_missiles"})
    assert exc.value.code == "BAD_MESSAGE"


def test_step_applies_pending_action_and_logs_tick(reduced):
    mgr = _manager(concept="none")
    sid, out = mgr.open_session()
    action = out[1]["payload"]["legal_actions"][0]
    mgr.client_message(sid, {"type": "gaze", "payload": {"aspect": "human_hand"}})
    mgr.client_message(sid, {"type": "human_action", "payload": {"action": action}})
    out = mgr.step_session(sid)
    kinds = [m["type"] for m in out]
    assert kinds[-2:] == ["state_update", "tick"]
    session = mgr.sessions[sid]
    rec = session.ticks[0]
    assert rec["human_action"] == action
    assert rec["attention"] == ["human_hand"]
    # a second step with nothing pending records a noop
    mgr.step_session(sid)
    assert session.ticks[1]["human_action"].startswith("human:noop")


def test_gaze_outside_vocabulary_is_ignored():
    mgr = _manager(concept="none")
    sid, _ = mgr.open_session()
    mgr.client_message(sid, {"type": "gaze", "payload": {"aspect": "the_moon"}})
    mgr.step_session(sid)
    assert mgr.sessions[sid].ticks[0]["attention"] == []


def test_close_session_produces_episode_log():
    mgr = _manager(concept="tomcom")
    sid, _ = mgr.open_session()
    for _ in range(3):
        mgr.step_session(sid)
    log = mgr.close_session(sid)
    assert sid not in mgr.sessions
    assert log["meta"]["concept"] == "tomcom"
    assert len(log["ticks"]) == 3
    assert {"orders_served", "signals", "errors"} <= set(log["summary"])
    json.dumps(log)


def test_step_after_finish_raises():
    mgr = _manager(concept="none", ticks=1)
    sid, _ = mgr.open_session()
    mgr.step_session(sid)
    with pytest.raises(SessionError) as exc:
        mgr.step_session(sid)
    assert exc.value.code == "UNKNOWN_SESSION"


def test_tracked_concepts_emit_diagnostics():
    mgr = _manager(concept="tom_threshold")
    sid, _ = mgr.open_session()
    mgr.step_session(sid)
    diag = mgr.sessions[sid].ticks[0]["diagnostics"]
    assert set(diag) == {"deviations", "ess", "degenerate_weights"}


def test_websocket_hello_tick_bye_roundtrip():
    from starlette.testclient import TestClient

    app = create_app(SessionConfig(config="reduced", ticks=3, params=FAST, tick_period_ms=60_000))
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "payload": {"concept": "none"}}))
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            first = json.loads(ws.receive_text())
            assert first["type"] == "state_update"
            ws.send_text(json.dumps({"type": "tick", "payload": {}}))
            kinds = [json.loads(ws.receive_text())["type"] for _ in range(2)]
            assert kinds == ["state_update", "tick"]
            ws.send_text(json.dumps({"type": "bye", "payload": {}}))
            bye = json.loads(ws.receive_text())
            assert bye["type"] == "bye"
            assert bye["payload"]["ticks"] == 1


def test_websocket_requires_hello_first():
    from starlette.testclient import TestClient

    app = create_app(SessionConfig(config="reduced", ticks=3, params=FAST))
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "tick", "payload": {}}))
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            assert err["payload"]["code"] == "BAD_MESSAGE"
