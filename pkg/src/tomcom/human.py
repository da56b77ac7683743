"""Generative human model: noisy-rational decisions on top of a belief.

The human samples states from its belief, scores each legal action by a
short greedy rollout of both agents through the real dynamics, and picks
an action softmax-proportionally to the estimated return.  A false belief
about a recipe variant therefore produces exactly the behavior we want to
study: confidently picking, processing and boarding the wrong ingredient.

`SimulatedHuman` wraps this into an episode-ready participant with a gaze
model and injectable false beliefs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief import (
    BeliefState,
    Observation,
    PerceptionModel,
    _involved_aspects,
    belief_from_state,
    belief_observe,
    belief_predict,
    legality_feedback,
    perceive,
)
from .config import TaskConfig
from .domain import (
    TaskAction,
    WorldState,
    apply_single,
    legal_actions,
    optimal_actions,
    state_key,
    step,
    unstick_action,
)
from .robot import state_value


@dataclass
class DecisionModel:
    temperature: float = 3.0
    horizon: int = 8
    discount: float = 0.95
    n_samples: int = 32
    # small per-action cost used only inside rollout scoring; it breaks
    # the ties that per-tick step cost leaves between resting and
    # pointlessly shuffling items around
    effort_cost: float = 0.1


@dataclass
class FalseBeliefInjection:
    aspect: str
    wrong_value: int
    onset_tick: int
    blind: bool = True
    applied: bool = False


def _greedy(cfg: TaskConfig, state: WorldState, actor: str) -> TaskAction:
    acts = optimal_actions(cfg, state, actor, verified=True)
    if acts:
        return acts[0]
    unstick = unstick_action(cfg, state, actor)
    return unstick if unstick is not None else TaskAction.noop(actor)


def _tick_reward(cfg: TaskConfig, events: dict) -> float:
    rw = cfg.rewards
    return (
        rw.step_cost
        + rw.serve_reward * len(events["served"])
        + rw.trash_cost * len(events["trashed"])
    )


def rollout_return(
    cfg: TaskConfig,
    state: WorldState,
    first_action: TaskAction,
    model: DecisionModel,
    actor: str = "human",
) -> float:
    """Discounted return of taking `first_action` then playing greedily.

    Both agents follow the plan oracle greedily for the remaining
    horizon; the rollout is deterministic given the start state.  The
    leaf is scored by `state_value` so actions whose payoff lies beyond
    the horizon still separate.
    """
    memo_key = (
        "rollout",
        state_key(cfg, state),
        first_action.key(),
        actor,
        model.horizon,
        model.discount,
        model.effort_cost,
    )
    cached = cfg.analysis_cache.get(memo_key)
    if cached is not None:
        return cached
    total = 0.0
    disc = 1.0
    cur = state
    for h in range(model.horizon):
        if actor == "human":
            a_h = first_action if h == 0 else _greedy(cfg, cur, "human")
            a_r = _greedy(cfg, apply_single(cfg, cur, a_h)[0], "robot")
        else:
            a_h = _greedy(cfg, cur, "human")
            a_r = first_action if h == 0 else _greedy(cfg, apply_single(cfg, cur, a_h)[0], "robot")
        cur, events = step(cfg, cur, a_h, a_r, respawn=False)
        own = a_h if actor == "human" else a_r
        total += disc * (_tick_reward(cfg, events) - (model.effort_cost if own.verb != "noop" else 0.0))
        disc *= model.discount
    result = total + disc * state_value(cfg, cur)
    cfg.analysis_cache[memo_key] = result
    return result


def q_values(
    cfg: TaskConfig,
    belief: BeliefState,
    template: WorldState,
    model: DecisionModel,
    rng,
    actor: str = "human",
) -> dict[TaskAction, float]:
    """Belief-sampled rollout estimate of Q(b, a) over modal-legal actions."""
    modal = belief.modal_state(cfg, template)
    actions = legal_actions(cfg, modal, actor)
    # duplicate sampled states collapse into weights: beliefs are usually
    # near-deterministic and this keeps the rollout count small
    weights: dict[tuple, float] = {}
    states: dict[tuple, WorldState] = {}
    for _ in range(model.n_samples):
        s = belief.sample_state(cfg, template, rng)
        k = state_key(cfg, s)
        weights[k] = weights.get(k, 0.0) + 1.0
        states[k] = s
    total = sum(weights.values())
    q: dict[TaskAction, float] = {}
    for a in actions:
        val = 0.0
        for k, w in weights.items():
            val += w * rollout_return(cfg, states[k], a, model, actor)
        q[a] = val / total
    return q


def softmax_probs(q: dict[TaskAction, float], temperature: float) -> tuple[list[TaskAction], np.ndarray]:
    actions = list(q)
    if temperature <= 0.0:
        return actions, np.full(len(actions), 1.0 / len(actions))
    z = temperature * np.array([q[a] for a in actions])
    z -= z.max()
    p = np.exp(z)
    return actions, p / p.sum()


def act(
    cfg: TaskConfig,
    belief: BeliefState,
    template: WorldState,
    model: DecisionModel,
    rng,
    actor: str = "human",
) -> tuple[TaskAction, dict[TaskAction, float]]:
    q = q_values(cfg, belief, template, model, rng, actor)
    actions, p = softmax_probs(q, model.temperature)
    return actions[int(rng.choice(len(actions), p=p))], q


# ---------------------------------------------------------------------------
# simulated participant


@dataclass
class AttentionModel:
    p_att: float = 0.7


class SimulatedHuman:
    """A scripted stand-in for a study participant.

    Each tick: choose gaze (the aspects of the action being worked on
    with probability p_att, otherwise a random glance), perceive, update
    the belief, then act.  Injected false beliefs overwrite a factor at
    their onset; `blind` injections additionally filter out any direct
    observation of that aspect, so only behavioral feedback can fix them.
    """

    def __init__(
        self,
        cfg: TaskConfig,
        initial_state: WorldState,
        rng,
        perception: PerceptionModel | None = None,
        decision: DecisionModel | None = None,
        attention: AttentionModel | None = None,
        injections: list[FalseBeliefInjection] | None = None,
    ):
        self.cfg = cfg
        self.rng = rng
        self.perception = perception or PerceptionModel()
        self.decision = decision or DecisionModel()
        self.attention = attention or AttentionModel()
        self.injections = injections or []
        self.belief = belief_from_state(cfg, initial_state)
        self.last_action: TaskAction = TaskAction.noop("human")
        self.last_attention: set = set()
        # aspects a communication signal directs gaze to for the next
        # tick; may include otherwise unobservable aspects (e.g. a shown
        # recipe card).  Cleared after one use.
        self.forced_attention: set = set()
        # action override for proposal-style assistance (DEV baseline)
        self.forced_action: TaskAction | None = None

    def receive_signal(self, aspects: set, uptake_prob: float = 1.0) -> bool:
        """Deliver a communication signal pointing at `aspects`.

        With probability `uptake_prob` the human attends the signal next
        tick; an explicit signal also overrides blindness on those
        aspects (a recipe card in the face beats not-looking-at-the-wall).
        Returns whether the signal was taken up.
        """
        if self.rng.random() >= uptake_prob:
            return False
        self.forced_attention |= set(aspects)
        for inj in self.injections:
            if inj.aspect in aspects:
                inj.blind = False
        return True

    def _apply_injections(self, tick: int) -> None:
        for inj in self.injections:
            if not inj.applied and tick >= inj.onset_tick:
                f = np.full_like(self.belief.factors[inj.aspect], 0.0)
                f[inj.wrong_value] = 1.0
                self.belief.factors[inj.aspect] = f
                inj.applied = True

    def _blind_aspects(self, tick: int) -> set:
        return {
            inj.aspect
            for inj in self.injections
            if inj.applied and inj.blind
        }

    def choose_attention(self, state: WorldState) -> set:
        cfg = self.cfg
        observable = cfg.observable_aspects
        att: set = set()
        if self.rng.random() < self.attention.p_att:
            att |= {a for a in _involved_aspects(cfg, self.last_action) if a in observable}
        att.add(observable[int(self.rng.integers(len(observable)))])
        # the order display is prominent; it is always in view
        att |= set(cfg.order_aspects)
        att |= self.forced_attention
        return att

    def tick(self, state: WorldState) -> tuple[TaskAction, Observation]:
        """One human turn: gaze, update, decide."""
        self._apply_injections(state.tick)
        attention = self.choose_attention(state)
        self.last_attention = attention
        self.forced_attention = set()
        obs = perceive(self.cfg, state, attention, self.perception, self.rng)
        for aspect in self._blind_aspects(state.tick):
            obs.revealed_values.pop(aspect, None)
        self.belief = belief_observe(self.cfg, self.belief, obs, self.perception)
        if self.forced_action is not None:
            action, self.forced_action = self.forced_action, None
        else:
            action, _q = act(self.cfg, self.belief, state, self.decision, self.rng)
        self.last_action = action
        return action, obs

    def after_step(
        self,
        prev_state: WorldState,
        own_action: TaskAction,
        degraded: bool,
        robot_action: TaskAction | None = None,
    ) -> None:
        """Digest the outcome of the tick the human just acted in.

        A rejected action is strong evidence about the aspects it relied
        on.  The kitchen is shared, so the robot's move is in plain view:
        when `robot_action` is given it is pushed through the dynamics
        directly; otherwise the human falls back to predicting the robot
        (uniform over plan-reducing actions under its own belief).
        """
        if degraded:
            self.belief = legality_feedback(self.cfg, self.belief, prev_state, own_action)
            own_action = TaskAction.noop("human")
        if robot_action is not None:
            robot_dist = [(robot_action, 1.0)]
        else:
            modal = self.belief.modal_state(self.cfg, prev_state)
            after_own, _ = apply_single(self.cfg, modal, own_action)
            robot_acts = [
                a for a in optimal_actions(self.cfg, after_own, "robot") if a.verb != "noop"
            ]
            robot_dist = None
            if robot_acts:
                p = 1.0 / len(robot_acts)
                robot_dist = [(a, p) for a in robot_acts]
        self.belief = belief_predict(self.cfg, self.belief, prev_state, own_action, robot_dist)
