"""Live session host: the simulator, robot, tracker and signal planner
driven by a real human over a websocket.

The protocol is JSON text frames on a single connection.  Every message is
``{"type": ..., "session": ..., "tick": ..., "payload": {...}}``:

client → server
    hello         payload {"concept"?: str}  (open a session)
    gaze          payload {"aspect": str}    (pointer hover; many per tick)
    human_action  payload {"action": str}    (task action key; last one wins)
    tick          payload {}                 (force-step now; scripted clients)
    bye           payload {}                 (close; server replies bye)

server → client
    hello         payload: client-facing task config (render vocabulary)
    state_update  payload {"state", "legal_actions"}  (strictly increasing tick)
    comm_signal   payload {"kind", "payload"}   (same tick it was decided)
    tick          payload {"served", "inference_skip", "human_degraded"}
    error         payload {"code", "detail"}
    bye           payload {"ticks"}

Game logic is in the sans-IO `SessionManager`; the FastAPI app only moves
messages and runs the tick clock.  If inference overran the tick period on
the previous tick, the planner is skipped for one tick and the tick
message carries ``inference_skip: true`` — the clock never stalls.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .baselines import DevConfig, TomThresholdConfig, dev_decide, tom_threshold_decide
from .belief import belief_from_state
from .comm import CommCost, CommEffectModel, CommPolicy, CommState, NONE_SIGNAL
from .config import TaskConfig, load_config
from .domain import (
    TaskAction,
    apply_single,
    initial_state,
    legal_actions,
    remaining_plan_length,
    state_to_json,
    step,
)
from .harness import EpisodeSpec, HarnessParams, _tracker_signal_update, write_log
from .inference import BeliefTracker
from .robot import RobotPolicy


@dataclass
class SessionConfig:
    config: str = "canonical"
    concept: str = "tomcom"
    ticks: int = 150
    seed: int = 0
    order_seed: int = 0
    tick_period_ms: int = 1000
    gaze_source: str = "hover"  # "hover" | "none"
    log_dir: str | None = None  # write the episode log here on close
    params: HarnessParams = field(default_factory=HarnessParams)


class SessionError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


def client_config(cfg: TaskConfig) -> dict:
    """Everything the browser needs to render the kitchen."""
    return {
        "name": cfg.name,
        "locations": list(cfg.locations),
        "order_aspects": list(cfg.order_aspects),
        "recipe_aspects": list(cfg.recipe_aspects),
        "aspects": {a: list(dom) for a, dom in cfg.aspects.items()},
        "ingredients": {
            i.id: {"display_name": i.display_name, "chain": list(i.chain), "storage": i.storage}
            for i in cfg.ingredients.values()
        },
        "recipes": {
            r.id: [{"ingredient": s.ingredient, "processing": list(s.processing)} for s in r.steps]
            for r in cfg.recipes.values()
        },
        "conflict_locations": list(cfg.conflict_locations),
    }


class Session:
    """One live episode; produces the same EpisodeLog dict as headless runs."""

    def __init__(self, session_id: str, scfg: SessionConfig):
        if scfg.concept not in ("none", "tomcom", "tom_threshold", "dev"):
            raise SessionError("BAD_CONFIG", f"unknown concept {scfg.concept}")
        try:
            self.cfg = load_config(scfg.config)
        except (FileNotFoundError, KeyError, ValueError) as exc:
            raise SessionError("BAD_CONFIG", str(exc)) from exc
        self.id = session_id
        self.scfg = scfg
        params = scfg.params
        self.state = initial_state(self.cfg, order_seed=scfg.order_seed)
        self.robot = RobotPolicy(self.cfg, np.random.default_rng([scfg.seed, 1]))
        self.tracker = None
        if scfg.concept in ("tomcom", "tom_threshold"):
            self.tracker = BeliefTracker(
                self.cfg,
                np.random.default_rng([scfg.seed, 2]),
                n_samples=params.tracker_samples,
                perception=params.perception(),
                decision=params.decision(),
                initial_belief=belief_from_state(self.cfg, self.state),
            )
        self.effect = CommEffectModel(eta=params.comm_eta)
        self.policy = None
        if scfg.concept == "tomcom":
            self.policy = CommPolicy(
                self.cfg,
                cost=CommCost(params.comm_cost),
                effect=self.effect,
                decision=params.decision(),
                perception=params.perception(),
                horizon=params.comm_horizon,
                n_rollouts=params.comm_rollouts,
                cooldown=params.cooldown,
                deviation_gate=params.deviation_gate,
                rng_seed=scfg.seed,
            )
        self.th_cfg = TomThresholdConfig(params.threshold)
        self.dev_cfg = DevConfig(params.dev_k)

        self.tick = 0
        self.ticks: list[dict] = []
        self.served_total = 0
        self.signals = 0
        self.last_signal_tick = -(10**9)
        self.last_a_h = TaskAction.noop("human")
        self.prev_state = self.state
        self.closed = False
        self._gaze: set[str] = set()
        self._pending_action: TaskAction | None = None
        self._inference_ms = 0.0

    # -- client input ------------------------------------------------------

    def handle(self, msg: dict) -> list[dict]:
        kind = msg.get("type")
        payload = msg.get("payload") or {}
        if kind == "gaze":
            aspect = payload.get("aspect")
            if self.scfg.gaze_source == "hover" and aspect in self.cfg.aspects:
                self._gaze.add(aspect)
            return []
        if kind == "human_action":
            try:
                self._pending_action = TaskAction.from_key(payload["action"])
            except (KeyError, ValueError) as exc:
                return [self._msg("error", {"code": "BAD_ACTION", "detail": str(exc)})]
            return []
        raise SessionError("BAD_MESSAGE", f"unexpected type {kind!r}")

    # -- tick --------------------------------------------------------------

    def state_update(self) -> dict:
        return self._msg(
            "state_update",
            {
                "state": state_to_json(self.cfg, self.state),
                "legal_actions": sorted(a.key() for a in legal_actions(self.cfg, self.state, "human")),
            },
        )

    def step(self) -> list[dict]:
        """Advance one tick; returns the outbound messages in order."""
        if self.closed or self.tick >= self.scfg.ticks:
            raise SessionError("UNKNOWN_SESSION", "session finished")
        params = self.scfg.params
        out: list[dict] = []
        started = time.perf_counter()
        skip = self._inference_ms > self.scfg.tick_period_ms

        signal = NONE_SIGNAL
        proposal = None
        if not skip:
            if self.scfg.concept == "tomcom":
                signal, _vals = self.policy.maybe_signal(
                    CommState(self.state, self.tracker.estimate, self.last_a_h)
                )
            elif self.scfg.concept == "tom_threshold":
                if self.tick - self.last_signal_tick >= params.cooldown:
                    signal = tom_threshold_decide(self.cfg, self.tracker.estimate, self.state, self.th_cfg)
                    if signal.kind != "none":
                        self.last_signal_tick = self.tick
            elif self.scfg.concept == "dev" and self.tick > 0:
                proposal = dev_decide(self.cfg, self.state, self.prev_state, self.last_a_h, self.dev_cfg)
        if signal.kind != "none":
            self.signals += 1
            aspects = self.effect.affected_aspects(self.cfg, signal, self.state)
            if self.tracker is not None:
                _tracker_signal_update(self.tracker, self.state, aspects, params.comm_eta)
            out.append(self._msg("comm_signal", {"kind": signal.kind, "payload": signal.payload}))
        if proposal is not None and proposal.actions:
            out.append(
                self._msg(
                    "comm_signal",
                    {"kind": "propose_action", "payload": proposal.actions[0].key()},
                )
            )

        a_h = self._pending_action or TaskAction.noop("human")
        attention = set(self._gaze)
        self._pending_action = None
        self._gaze = set()

        base = remaining_plan_length(self.cfg, self.state)
        after_h, _ = apply_single(self.cfg, self.state, a_h)
        plan_delta = remaining_plan_length(self.cfg, after_h) - base
        a_r = self.robot.act(after_h)
        prev = self.state
        self.state, events = step(self.cfg, self.state, a_h, a_r)
        self.served_total += len(events["served"])
        diagnostics = None
        if self.tracker is not None:
            diag = self.tracker.update(prev, attention, a_h, a_r, events["human_degraded"])
            diagnostics = {
                "deviations": {k: round(v, 6) for k, v in diag["deviations"].items()},
                "ess": round(diag["ess"], 3),
                "degenerate_weights": diag["degenerate_weights"],
            }
        self.ticks.append(
            {
                "tick": self.tick,
                "state": state_to_json(self.cfg, prev),
                "attention": sorted(attention),
                "human_action": a_h.key(),
                "robot_action": a_r.key(),
                "human_degraded": events["human_degraded"],
                "plan_delta": plan_delta,
                "served": events["served"],
                "comm": signal.key() if signal.kind != "none" else None,
                "proposal": proposal.key() if proposal is not None else None,
                "diagnostics": diagnostics,
                "injections_active": [],
            }
        )
        self.last_a_h = a_h
        self.prev_state = prev
        self.tick += 1
        self._inference_ms = 0.0 if skip else (time.perf_counter() - started) * 1000.0

        out.append(self.state_update())
        out.append(
            self._msg(
                "tick",
                {
                    "served": events["served"],
                    "human_degraded": events["human_degraded"],
                    "inference_skip": skip,
                },
            )
        )
        return out

    def close(self) -> dict:
        if self.closed:
            raise SessionError("UNKNOWN_SESSION", "already closed")
        self.closed = True
        spec = EpisodeSpec(
            seed=self.scfg.seed, order_seed=self.scfg.order_seed, ticks=len(self.ticks), injections=[]
        )
        return {
            "meta": {
                "spec": spec.to_json(),
                "concept": self.scfg.concept,
                "config": self.cfg.name,
                "config_hash": self.cfg.config_hash(),
                "params": asdict(self.scfg.params),
            },
            "ticks": self.ticks,
            "summary": {
                "orders_served": self.served_total,
                "signals": self.signals,
                "errors": sum(
                    1 for r in self.ticks if r["plan_delta"] > 0 and r["human_action"] != "human:noop:-:-"
                ),
            },
        }

    def _msg(self, kind: str, payload: dict) -> dict:
        return {"type": kind, "session": self.id, "tick": self.tick, "payload": payload}


class SessionManager:
    """Sans-IO session registry; one logical owner processes each session."""

    def __init__(self, defaults: SessionConfig | None = None):
        self.defaults = defaults or SessionConfig()
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)

    def open_session(self, overrides: dict | None = None) -> tuple[str, list[dict]]:
        scfg = SessionConfig(**{**asdict(self.defaults), **(overrides or {})})
        if isinstance(scfg.params, dict):
            scfg.params = HarnessParams(**scfg.params)
        sid = f"s{next(self._ids)}"
        session = Session(sid, scfg)
        self.sessions[sid] = session
        hello = session._msg("hello", client_config(session.cfg))
        return sid, [hello, session.state_update()]

    def _get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise SessionError("UNKNOWN_SESSION", sid)
        return session

    def client_message(self, sid: str, msg: dict) -> list[dict]:
        return self._get(sid).handle(msg)

    def step_session(self, sid: str) -> list[dict]:
        return self._get(sid).step()

    def close_session(self, sid: str) -> dict:
        session = self._get(sid)
        log = session.close()
        del self.sessions[sid]
        if session.scfg.log_dir:
            out_dir = Path(session.scfg.log_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_log(log, out_dir / f"live_{session.cfg.name}_{sid}.jsonl")
        return log


# ---------------------------------------------------------------------------
# websocket transport


def create_app(defaults: SessionConfig | None = None):
    """FastAPI app: websocket endpoint plus the static browser client."""
    app = FastAPI(title="tomcom session service")
    manager = SessionManager(defaults)
    app.state.manager = manager

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        sid = None
        loop = asyncio.get_running_loop()

        async def send_all(messages):
            for m in messages:
                await ws.send_text(json.dumps(m, sort_keys=True))

        try:
            raw = await ws.receive_text()
            hello = json.loads(raw)
            if hello.get("type") != "hello":
                await send_all([{"type": "error", "payload": {"code": "BAD_MESSAGE", "detail": "expected hello"}}])
                await ws.close()
                return
            sid, out = manager.open_session(hello.get("payload") or None)
            await send_all(out)
            session = manager.sessions[sid]
            period = session.scfg.tick_period_ms / 1000.0
            deadline = loop.time() + period
            while session.tick < session.scfg.ticks:
                timeout = max(0.0, deadline - loop.time())
                force = False
                try:
                    raw = await asyncio.wait_for(ws.receive_text(), timeout=timeout)
                    msg = json.loads(raw)
                    if msg.get("type") == "bye":
                        break
                    if msg.get("type") == "tick":
                        force = True
                    else:
                        await send_all(manager.client_message(sid, msg))
                except asyncio.TimeoutError:
                    # CLIENT_TIMEOUT: human treated as noop, session continues
                    force = True
                if force or loop.time() >= deadline:
                    # tick work runs off the event loop so gaze keeps flowing
                    out = await loop.run_in_executor(None, manager.step_session, sid)
                    await send_all(out)
                    deadline = loop.time() + period
            log = manager.close_session(sid)
            sid = None
            await send_all([{"type": "bye", "payload": {"ticks": len(log["ticks"])}}])
            await ws.close()
        except WebSocketDisconnect:
            pass
        except SessionError as exc:
            await send_all([{"type": "error", "payload": {"code": exc.code, "detail": exc.detail}}])
            await ws.close()
        finally:
            if sid is not None and sid in manager.sessions:
                manager.close_session(sid)

    static_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="client")
    return app
