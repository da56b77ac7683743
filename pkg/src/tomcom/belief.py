"""Human-side perception and belief machinery.

The human never sees the world state directly: gaze attends a few aspects
per tick, attended aspects reveal their value with some probability, and
confusable ingredients can be mis-read as their look-alike.  Beliefs are
kept factored per aspect (a categorical per aspect); `belief_observe` is
exact per-factor Bayes, `belief_predict` pushes the factors through the
task dynamics and is exact on the marginals of every aspect an action
touches (the joint over that small subset is enumerated, everything else
is untouched by construction).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import HAND_OF, NONE_VALUE, TaskConfig
from .domain import (
    OrderSlot,
    TaskAction,
    WorldState,
    apply_single,
    get_index,
    get_value,
    is_legal,
    with_values,
)

EPSILON = 1e-6

# keep at most this many values per factor when enumerating a sub-joint
MAX_SUPPORT = 12


@dataclass
class PerceptionModel:
    reveal_prob: float = 1.0
    confusion_prob: float = 0.0


@dataclass
class Observation:
    attended_aspects: set
    revealed_values: dict  # aspect -> observed value index
    tick: int = 0


@dataclass
class BeliefState:
    factors: dict  # aspect -> np.ndarray over the aspect's domain

    def copy(self) -> "BeliefState":
        return BeliefState({a: f.copy() for a, f in self.factors.items()})

    def factor(self, aspect: str) -> np.ndarray:
        return self.factors[aspect]

    def modal_values(self) -> dict:
        return {a: int(np.argmax(f)) for a, f in self.factors.items()}

    def modal_state(self, cfg: TaskConfig, template: WorldState) -> WorldState:
        return _as_state(cfg, template, self.modal_values())

    def sample_state(self, cfg: TaskConfig, template: WorldState, rng) -> WorldState:
        values = {a: int(rng.choice(len(f), p=f)) for a, f in self.factors.items()}
        return _as_state(cfg, template, values)


def _as_state(cfg: TaskConfig, template: WorldState, values: dict) -> WorldState:
    updates = {a: cfg.domain(a)[idx] for a, idx in values.items()}
    state = with_values(cfg, template, updates)
    # keep the order metadata consistent with the (possibly believed)
    # order aspects, so serves and respawns behave under sampled states
    orders = list(state.orders)
    changed = False
    for i, aspect in enumerate(cfg.order_aspects):
        value = get_value(cfg, state, aspect)
        recipe = None if value == NONE_VALUE else value
        if orders[i].recipe_id != recipe:
            orders[i] = OrderSlot(recipe, orders[i].order_id, state.tick, None if recipe else state.tick + 10**6)
            changed = True
    if changed:
        state = replace(state, orders=tuple(orders))
    return state


def uniform_belief(cfg: TaskConfig) -> BeliefState:
    return BeliefState({a: np.full(len(dom), 1.0 / len(dom)) for a, dom in cfg.aspects.items()})


def belief_from_state(cfg: TaskConfig, state: WorldState) -> BeliefState:
    factors = {}
    for a, dom in cfg.aspects.items():
        f = np.zeros(len(dom))
        f[get_index(cfg, state, a)] = 1.0
        factors[a] = f
    return BeliefState(factors)


# ---------------------------------------------------------------------------
# perception


def _confused_index(cfg: TaskConfig, aspect: str, idx: int) -> int | None:
    """Domain index of the look-alike of the value at `idx`, if any."""
    value = cfg.domain(aspect)[idx]
    if value == NONE_VALUE or cfg.is_product(value):
        return None
    partner = cfg.confusable_item(value)
    if partner is None:
        return None
    try:
        return cfg.value_index(aspect, partner)
    except KeyError:
        return None


def perceive(
    cfg: TaskConfig,
    state: WorldState,
    attention: set,
    model: PerceptionModel,
    rng,
) -> Observation:
    """Generate the human's observation for one tick of gaze."""
    revealed = {}
    for aspect in attention:
        if rng.random() >= model.reveal_prob:
            continue
        idx = get_index(cfg, state, aspect)
        partner = _confused_index(cfg, aspect, idx)
        if partner is not None and rng.random() < model.confusion_prob:
            idx = partner
        revealed[aspect] = idx
    return Observation(set(attention), revealed, state.tick)


def observation_likelihood(
    cfg: TaskConfig, aspect: str, observed_idx: int, model: PerceptionModel
) -> np.ndarray:
    """p(observed value | true value) over the aspect's domain."""
    dom = cfg.domain(aspect)
    lik = np.zeros(len(dom))
    lik[observed_idx] = 1.0 - model.confusion_prob if _confused_index(cfg, aspect, observed_idx) is not None else 1.0
    for t in range(len(dom)):
        partner = _confused_index(cfg, aspect, t)
        if partner == observed_idx:
            lik[t] = model.confusion_prob
    return lik


def bayes_update(prior: np.ndarray, likelihood: np.ndarray) -> np.ndarray:
    """Exact categorical Bayes: normalize prior × likelihood.

    If the product has no mass (the observation contradicts the prior
    completely) the likelihood alone is trusted.
    """
    post = prior * likelihood
    z = post.sum()
    if z <= 0.0:
        post = likelihood
        z = post.sum()
    return post / z


def belief_observe(
    cfg: TaskConfig, belief: BeliefState, obs: Observation, model: PerceptionModel
) -> BeliefState:
    """Exact per-factor Bayes update; unrevealed aspects unchanged."""
    out = belief.copy()
    for aspect, observed_idx in obs.revealed_values.items():
        prior = np.maximum(out.factors[aspect], EPSILON)
        out.factors[aspect] = bayes_update(
            prior, observation_likelihood(cfg, aspect, observed_idx, model)
        )
    return out


# ---------------------------------------------------------------------------
# prediction


def _involved_aspects(cfg: TaskConfig, action: TaskAction) -> list[str]:
    hand = HAND_OF[action.actor]
    verb = action.verb
    if verb == "noop":
        return []
    if verb == "pick":
        if action.source in cfg.ingredients:
            return [hand]
        return [hand, action.source]
    if verb == "place":
        if action.target == "assembly_board":
            return [hand] + list(cfg.assembly_slot_ids)
        return [hand, action.target]
    if verb in ("cut", "cook"):
        return ["cutting_board" if verb == "cut" else "cooking_pot"]
    if verb == "shape":
        return [hand]
    if verb == "assemble":
        return list(cfg.assembly_slot_ids) + [cfg.recipe_aspect(action.source)]
    if verb == "serve":
        return ["plate"] + list(cfg.order_aspects)
    if verb == "trash":
        return ["trash"]
    return []


def _support(factor: np.ndarray, mass: float = 1.0) -> list[tuple[int, float]]:
    order = np.argsort(factor)[::-1]
    out = []
    cum = 0.0
    limit = min(mass, 1.0 - EPSILON)
    for i in order:
        p = float(factor[i])
        if p <= EPSILON or len(out) >= MAX_SUPPORT:
            break
        out.append((int(i), p))
        cum += p
        if cum >= limit:
            break
    z = sum(p for _, p in out)
    return [(i, p / z) for i, p in out]


def _predict_one(
    cfg: TaskConfig,
    belief: BeliefState,
    template: WorldState,
    action: TaskAction,
    support_mass: float = 1.0,
) -> BeliefState:
    aspects = _involved_aspects(cfg, action)
    if not aspects:
        return belief.copy()
    supports = [_support(belief.factors[a], support_mass) for a in aspects]
    post = {a: np.zeros_like(belief.factors[a]) for a in aspects}
    modal = belief.modal_state(cfg, template)

    def recurse(i, values, prob):
        if prob <= 0.0:
            return
        if i == len(aspects):
            st = _as_state(cfg, modal, dict(zip(aspects, values)))
            nxt, _ = apply_single(cfg, st, action)
            for a in aspects:
                post[a][get_index(cfg, nxt, a)] += prob
            return
        for idx, p in supports[i]:
            recurse(i + 1, values + [idx], prob * p)

    recurse(0, [], 1.0)
    out = belief.copy()
    for a in aspects:
        z = post[a].sum()
        out.factors[a] = post[a] / z if z > 0 else belief.factors[a]
    return out


def belief_predict(
    cfg: TaskConfig,
    belief: BeliefState,
    template: WorldState,
    human_action: TaskAction,
    robot_policy_dist: list[tuple[TaskAction, float]] | None = None,
    support_mass: float = 1.0,
) -> BeliefState:
    """Push the belief through one tick of dynamics.

    The human action is applied first, then the robot's action
    distribution is marginalized; each application computes exact
    marginals over the aspects the action can touch.  `support_mass < 1`
    truncates each factor to its top values covering that much mass
    before enumerating — an approximation for dense beliefs (Dirichlet
    samples) where exact enumeration would blow up combinatorially.
    """
    cur = _predict_one(cfg, belief, template, human_action, support_mass)
    if not robot_policy_dist:
        return cur
    mixed: dict[str, np.ndarray] = {}
    for action, prob in robot_policy_dist:
        if prob <= 0.0:
            continue
        branch = _predict_one(cfg, cur, template, action, support_mass)
        for a, f in branch.factors.items():
            mixed[a] = mixed.get(a, 0.0) + prob * f
    out = BeliefState(mixed)
    for a, f in out.factors.items():
        out.factors[a] = f / f.sum()
    return out


# ---------------------------------------------------------------------------
# action feedback


def legality_feedback(
    cfg: TaskConfig,
    belief: BeliefState,
    template: WorldState,
    action: TaskAction,
    support_mass: float = 1.0,
) -> BeliefState:
    """Learn from an attempted action that had no effect.

    If the world rejected the action, every believed value under which it
    would have been legal loses mass.  This is what lets a cook recover
    from a false recipe belief without being told: the assemble they
    attempt keeps failing.
    """
    aspects = _involved_aspects(cfg, action)
    if not aspects:
        return belief.copy()
    supports = [
        _support(np.maximum(belief.factors[a], EPSILON) / np.maximum(belief.factors[a], EPSILON).sum(), support_mass)
        for a in aspects
    ]
    post = {a: np.zeros_like(belief.factors[a]) for a in aspects}
    modal = belief.modal_state(cfg, template)
    totals = [0.0, 0.0]  # (probability enumerated, posterior weight)

    def recurse(i, values, prob):
        if prob <= 0.0:
            return
        if i == len(aspects):
            st = _as_state(cfg, modal, dict(zip(aspects, values)))
            w = EPSILON if is_legal(cfg, st, action) else 1.0
            totals[0] += prob
            totals[1] += prob * w
            for a, idx in zip(aspects, values):
                post[a][idx] += prob * w
            return
        for idx, p in supports[i]:
            recurse(i + 1, values + [idx], prob * p)

    recurse(0, [], 1.0)
    out = belief.copy()
    if totals[1] <= 2.0 * EPSILON * totals[0]:
        # every believed combination says the action was legal, yet the
        # world rejected it: the belief is flat-out contradicted.  Fall
        # back to a per-factor update over the full domain (others held
        # at their modal values), mirroring bayes_update's contradiction
        # handling — this is the escape hatch from a confidently wrong
        # belief (e.g. "I am holding something" when the hand is empty).
        for a in aspects:
            dom_n = len(belief.factors[a])
            lik = np.empty(dom_n)
            for v in range(dom_n):
                st = _as_state(cfg, modal, {a: v})
                lik[v] = EPSILON if is_legal(cfg, st, action) else 1.0
            prior = np.maximum(belief.factors[a], EPSILON)
            out.factors[a] = bayes_update(prior / prior.sum(), lik)
        return out
    for a in aspects:
        z = post[a].sum()
        if z > 0:
            out.factors[a] = post[a] / z
    return out
