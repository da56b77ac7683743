"""Communication planning: when is a signal worth its distraction cost?

The robot can show a recipe card or highlight a location.  A signal is
modeled as a partial collapse of the human's belief toward the truth
(effect strength η); its value is estimated by rolling out the next few
ticks with sampled human beliefs, with and without the signal, under
common random numbers.  A signal is sent when the expected improvement
in task return beats the configured cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState, Observation, PerceptionModel, belief_observe, legality_feedback
from .config import TaskConfig
from .domain import TaskAction, WorldState, apply_single, get_index, legal_actions, step
from .human import DecisionModel, _greedy
from .inference import BeliefSampleSet, EstimatedBelief, belief_deviation, sample_beliefs
from .robot import robot_act, state_value


@dataclass(frozen=True)
class CommAction:
    kind: str  # "none" | "show_recipe" | "highlight_location"
    payload: str | None = None

    def __post_init__(self):
        if (self.kind == "none") != (self.payload is None):
            raise ValueError("payload present iff kind != none")

    def key(self) -> str:
        return self.kind if self.payload is None else f"{self.kind}:{self.payload}"


NONE_SIGNAL = CommAction("none")


@dataclass
class CommEffectModel:
    """Which aspects a signal corrects, and how strongly (η)."""

    eta: float = 0.9

    def affected_aspects(self, cfg: TaskConfig, action: CommAction, state: WorldState) -> list[str]:
        if action.kind == "none":
            return []
        if action.kind == "show_recipe":
            aspects = [cfg.recipe_aspect(action.payload)]
            # the card names the order it belongs to, so the order display
            # entry showing this recipe is grounded too
            for a in cfg.order_aspects:
                if cfg.domain(a)[get_index(cfg, state, a)] == action.payload:
                    aspects.append(a)
            return aspects
        if action.kind == "highlight_location":
            if action.payload == "assembly_board":
                return list(cfg.assembly_slot_ids)
            return [action.payload]
        raise ValueError(f"unknown signal kind {action.kind}")


@dataclass
class CommCost:
    cost: float = 1.5  # in units of task-action value


@dataclass
class CommState:
    world: WorldState
    estimate: EstimatedBelief
    last_human_action: TaskAction


def apply_comm_effect(
    cfg: TaskConfig,
    samples: BeliefSampleSet,
    action: CommAction,
    true_state: WorldState,
    effect: CommEffectModel,
) -> BeliefSampleSet:
    """Mix each affected factor toward a delta at the true value."""
    aspects = effect.affected_aspects(cfg, action, true_state)
    if not aspects:
        return samples
    out = []
    for b in samples.samples:
        nb = b.copy()
        for a in aspects:
            delta = np.zeros_like(nb.factors[a])
            delta[get_index(cfg, true_state, a)] = 1.0
            nb.factors[a] = (1.0 - effect.eta) * nb.factors[a] + effect.eta * delta
        out.append(nb)
    return BeliefSampleSet(out, samples.weights.copy(), dict(samples.flags))


def _simulate_tick(
    cfg: TaskConfig,
    state: WorldState,
    human_belief: BeliefState,
    model: DecisionModel,
    perception: PerceptionModel,
    rng,
) -> tuple[WorldState, BeliefState, float]:
    """One rollout tick: greedy human under its belief, greedy robot.

    The simulated human is the greedy (large-τ) limit of the softmax
    model — a per-tick softmax would make signal evaluation two orders
    of magnitude slower for little change in the benefit estimate.  It
    re-observes the aspects its chosen action touches (truth sync) and
    learns from rejected actions, which is what lets a shown-recipe
    rollout realize corrected behavior while the no-signal rollout keeps
    erring.
    """
    modal = human_belief.modal_state(cfg, state)
    a_h = _greedy(cfg, modal, "human")
    s_h, ev_h = apply_single(cfg, state, a_h)
    a_r = robot_act(cfg, s_h, rng)
    nxt, events = step(cfg, state, a_h, a_r, respawn=False)
    rw = cfg.rewards
    r = rw.step_cost + rw.serve_reward * len(events["served"]) + rw.trash_cost * len(events["trashed"])
    belief = human_belief
    if events["human_degraded"]:
        belief = legality_feedback(cfg, belief, state, a_h)
    else:
        from .belief import belief_predict

        belief = belief_predict(cfg, belief, state, a_h, [(a_r, 1.0)] if a_r.verb != "noop" else None)
    # partial truth sync: the human sees what it is working with
    seen = {
        a
        for a in _rollout_attention(cfg, a_h)
        if rng.random() < perception.reveal_prob
    }
    if seen:
        obs = Observation(seen, {a: get_index(cfg, nxt, a) for a in seen}, nxt.tick)
        belief = belief_observe(cfg, belief, obs, perception)
    return nxt, belief, r


def _rollout_attention(cfg: TaskConfig, action: TaskAction) -> list[str]:
    from .belief import _involved_aspects

    return [a for a in _involved_aspects(cfg, action) if a in cfg.observable_aspects]


# expected extra actions caused by finishing an order under a wrong recipe
# variant (the wasted prep detour plus disposal of the wrong item)
WRONG_VARIANT_ACTIONS = 4.0


def _belief_misalignment(cfg: TaskConfig, state: WorldState, belief: BeliefState) -> float:
    """Expected number of ordered recipes the human holds wrong."""
    total = 0.0
    for o in state.orders:
        if o.recipe_id is None:
            continue
        a = cfg.recipe_aspect(o.recipe_id)
        total += 1.0 - float(belief.factors[a][get_index(cfg, state, a)])
    return total


def expected_return(
    cfg: TaskConfig,
    comm_state: CommState,
    action: CommAction,
    horizon: int = 8,
    n_rollouts: int = 64,
    rng_seed: int = 0,
    effect: CommEffectModel | None = None,
    decision: DecisionModel | None = None,
    perception: PerceptionModel | None = None,
    discount: float = 0.95,
) -> float:
    """Monte Carlo value of sending `action` now.

    Rollouts are seeded from `rng_seed` per rollout index, so calling
    this for several candidates with the same seed yields common random
    numbers and a low-variance benefit difference.
    """
    effect = effect or CommEffectModel()
    decision = decision or DecisionModel()
    perception = perception or PerceptionModel()
    total = 0.0
    for i in range(n_rollouts):
        rng = np.random.default_rng([rng_seed, i])
        sample = sample_beliefs(comm_state.estimate, 1, rng)
        if action.kind != "none":
            sample = apply_comm_effect(cfg, sample, action, comm_state.world, effect)
        belief = sample.samples[0]
        state = comm_state.world
        ret = 0.0
        disc = 1.0
        for _ in range(horizon):
            state, belief, r = _simulate_tick(cfg, state, belief, decision, perception, rng)
            ret += disc * r
            disc *= discount
        # the leaf must see the belief, not just the board: within a short
        # horizon the greedy rollout may never touch the order the human is
        # wrong about, yet the wrong variant still costs its detour later
        leaf = state_value(cfg, state) + 0.5 * cfg.rewards.step_cost * (
            WRONG_VARIANT_ACTIONS * _belief_misalignment(cfg, state, belief)
        )
        ret += disc * leaf
        total += ret
    return total / n_rollouts


def gate_aspects(cfg: TaskConfig, state: WorldState) -> set:
    """Aspects whose deviation the signal vocabulary can actually correct.

    Deviations elsewhere (the order display the human never stops seeing,
    recipes no active order needs) either cannot persist or cannot be
    acted on, so they should not trigger signal evaluation.
    """
    out: set = set()
    for o in state.orders:
        if o.recipe_id is not None:
            out.add(cfg.recipe_aspect(o.recipe_id))
    for loc in cfg.conflict_locations:
        if loc == "assembly_board":
            out.update(cfg.assembly_slot_ids)
        else:
            out.add(loc)
    return out


def max_gated_deviation(cfg: TaskConfig, estimate: EstimatedBelief, state: WorldState) -> float:
    devs = belief_deviation(cfg, estimate, state)
    return max((devs[a] for a in gate_aspects(cfg, state)), default=0.0)


def candidate_set(cfg: TaskConfig, comm_state: CommState) -> list[CommAction]:
    out = [NONE_SIGNAL]
    for o in comm_state.world.orders:
        if o.recipe_id is not None:
            out.append(CommAction("show_recipe", o.recipe_id))
    for loc in cfg.conflict_locations:
        out.append(CommAction("highlight_location", loc))
    return out


def decide(
    cfg: TaskConfig,
    comm_state: CommState,
    candidates: list[CommAction],
    cost: CommCost,
    horizon: int = 8,
    n_rollouts: int = 64,
    rng_seed: int = 0,
    effect: CommEffectModel | None = None,
    decision: DecisionModel | None = None,
    perception: PerceptionModel | None = None,
) -> tuple[CommAction, dict]:
    """Argmax of expected return minus signal cost; ties go to silence."""
    values = {}
    for cand in candidates:
        v = expected_return(
            cfg, comm_state, cand, horizon, n_rollouts, rng_seed, effect, decision, perception
        )
        values[cand] = v - (cost.cost if cand.kind != "none" else 0.0)
    best = max(values.values())
    none_value = values.get(NONE_SIGNAL, -np.inf)
    if none_value >= best - 1e-12:
        chosen = NONE_SIGNAL
    else:
        chosen = max(values, key=lambda c: (values[c], c.kind == "none"))
    return chosen, {c.key(): v for c, v in values.items()}


@dataclass
class CommPolicy:
    """Episode-level pacing: deviation gate plus a cooldown between signals.

    Rollout evaluation is expensive; `decide` only runs when the tracked
    deviation suggests something might be wrong, and at most one signal
    per `cooldown` ticks is sent.
    """

    cfg: TaskConfig
    cost: CommCost = field(default_factory=CommCost)
    effect: CommEffectModel = field(default_factory=CommEffectModel)
    decision: DecisionModel = field(default_factory=DecisionModel)
    perception: PerceptionModel = field(default_factory=PerceptionModel)
    horizon: int = 8
    n_rollouts: int = 64
    cooldown: int = 3
    deviation_gate: float = 0.45
    rng_seed: int = 0
    last_signal_tick: int = -(10**9)

    def maybe_signal(self, comm_state: CommState) -> tuple[CommAction, dict]:
        tick = comm_state.world.tick
        if tick - self.last_signal_tick < self.cooldown:
            return NONE_SIGNAL, {"gated": "cooldown"}
        md = max_gated_deviation(self.cfg, comm_state.estimate, comm_state.world)
        if md < self.deviation_gate:
            return NONE_SIGNAL, {"gated": "deviation"}
        chosen, values = decide(
            self.cfg,
            comm_state,
            candidate_set(self.cfg, comm_state),
            self.cost,
            self.horizon,
            self.n_rollouts,
            rng_seed=self.rng_seed + tick,
            effect=self.effect,
            decision=self.decision,
            perception=self.perception,
        )
        if chosen.kind != "none":
            self.last_signal_tick = tick
        return chosen, values
