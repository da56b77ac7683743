"""Perception and factored belief machinery: exact Bayes, prediction, feedback."""

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tomcom.belief import (
    BeliefState,
    Observation,
    PerceptionModel,
    _as_state,
    bayes_update,
    belief_from_state,
    belief_observe,
    belief_predict,
    legality_feedback,
    observation_likelihood,
    perceive,
    uniform_belief,
)
from tomcom.config import load_config
from tomcom.domain import (
    TaskAction,
    apply_single,
    get_index,
    initial_state,
    is_legal,
    legal_actions,
    with_values,
)


def _distributions(size):
    return (
        arrays(np.float64, size, elements=st.floats(1e-6, 1.0))
        .map(lambda v: v / v.sum())
    )


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30).flatmap(lambda k: st.tuples(_distributions(k), _distributions(k))))
def test_bayes_update_matches_direct_normalization(pair):
    prior, lik = pair
    got = bayes_update(prior, lik)
    want = prior * lik / (prior * lik).sum()
    assert np.allclose(got, want, atol=1e-12)
    assert abs(got.sum() - 1.0) < 1e-12


def test_bayes_update_contradiction_falls_back_to_likelihood():
    prior = np.array([1.0, 0.0, 0.0])
    lik = np.array([0.0, 0.3, 0.7])
    got = bayes_update(prior, lik)
    assert np.allclose(got, [0.0, 0.3, 0.7])


def test_belief_observe_updates_only_revealed_aspects(reduced, reduced_state):
    belief = uniform_belief(reduced)
    obs = Observation({"human_hand"}, {"human_hand": get_index(reduced, reduced_state, "human_hand")})
    out = belief_observe(reduced, belief, obs, PerceptionModel())
    assert out.factors["human_hand"].argmax() == get_index(reduced, reduced_state, "human_hand")
    for a in reduced.aspects:
        if a != "human_hand":
            assert np.array_equal(out.factors[a], belief.factors[a])


def test_perceive_reveals_attended_aspects_deterministically(reduced, reduced_state, rng):
    model = PerceptionModel(reveal_prob=1.0, confusion_prob=0.0)
    attention = {"human_hand", "cutting_board", "order_0"}
    obs = perceive(reduced, reduced_state, attention, model, rng)
    assert set(obs.revealed_values) == attention
    for a in attention:
        assert obs.revealed_values[a] == get_index(reduced, reduced_state, a)


def test_confusion_likelihood_rows_are_consistent(reduced):
    # tuna and salmon are look-alikes; observing "salmon" on the board
    # leaves confusion_prob mass on the true value being tuna
    model = PerceptionModel(confusion_prob=0.1)
    aspect = "cutting_board"
    obs_idx = reduced.value_index(aspect, "salmon")
    lik = observation_likelihood(reduced, aspect, obs_idx, model)
    assert lik[obs_idx] == 0.9
    assert lik[reduced.value_index(aspect, "tuna")] == 0.1


# ---------------------------------------------------------------------------
# transition oracle: belief_predict vs brute-force joint enumeration


def _random_sparse_belief(cfg, rng, max_support=3):
    factors = {}
    for a, dom in cfg.aspects.items():
        k = len(dom)
        s = min(k, int(rng.integers(1, max_support + 1)))
        idx = rng.choice(k, size=s, replace=False)
        p = rng.dirichlet(np.ones(s))
        f = np.zeros(k)
        f[idx] = p
        factors[a] = f
    return BeliefState(factors)


def _brute_force_predict(cfg, belief, template, action_chain):
    """Exact next-tick marginals: enumerate the full support joint and push
    every joint state through the action chain."""
    aspects = list(cfg.aspects)
    supports = [
        [(i, p) for i, p in enumerate(belief.factors[a]) if p > 0.0] for a in aspects
    ]
    post = {a: np.zeros_like(belief.factors[a]) for a in aspects}
    for combo in itertools.product(*supports):
        prob = 1.0
        for _, p in combo:
            prob *= p
        st_ = _as_state(cfg, template, {a: idx for a, (idx, _) in zip(aspects, combo)})
        for action in action_chain:
            st_, _ = apply_single(cfg, st_, action)
        for a in aspects:
            post[a][get_index(cfg, st_, a)] += prob
    for a in aspects:
        post[a] /= post[a].sum()
    return BeliefState(post)


def test_belief_predict_matches_brute_force_enumeration(reduced):
    cfg = reduced
    rng = np.random.default_rng(0)
    template = initial_state(cfg, order_seed=0)
    worst = 0.0
    for _ in range(100):
        belief = _random_sparse_belief(cfg, rng)
        modal = belief.modal_state(cfg, template)
        acts = [a for a in legal_actions(cfg, modal, "human") if a.verb != "noop"]
        if not acts:
            continue
        a_h = acts[int(rng.integers(len(acts)))]
        robot_acts = [a for a in legal_actions(cfg, modal, "robot") if a.verb != "noop"]
        chain = [a_h]
        robot_dist = None
        if robot_acts and rng.random() < 0.5:
            a_r = robot_acts[int(rng.integers(len(robot_acts)))]
            robot_dist = [(a_r, 1.0)]
            chain.append(a_r)
        got = belief_predict(cfg, belief, template, a_h, robot_dist)
        exact = _brute_force_predict(cfg, belief, template, chain)
        tv = max(0.5 * np.abs(got.factors[a] - exact.factors[a]).sum() for a in cfg.aspects)
        worst = max(worst, tv)
    assert worst < 1e-9


def test_belief_predict_mixes_robot_action_distribution(reduced, reduced_state):
    cfg = reduced
    belief = belief_from_state(cfg, with_values(cfg, reduced_state, {"robot_hand": "rice"}))
    template = with_values(cfg, reduced_state, {"robot_hand": "rice"})
    dist = [
        (TaskAction("robot", "place", target="trash"), 0.5),
        (TaskAction.noop("robot"), 0.5),
    ]
    out = belief_predict(cfg, belief, template, TaskAction.noop("human"), dist)
    assert abs(out.factors["trash"][cfg.value_index("trash", "rice")] - 0.5) < 1e-12
    assert abs(out.factors["robot_hand"][cfg.value_index("robot_hand", "rice")] - 0.5) < 1e-12


def test_belief_predict_leaves_untouched_aspects_alone(reduced, reduced_state):
    belief = uniform_belief(reduced)
    out = belief_predict(
        reduced, belief, reduced_state, TaskAction("human", "pick", source="salmon")
    )
    for a in reduced.aspects:
        if a != "human_hand":
            assert np.array_equal(out.factors[a], belief.factors[a])


# ---------------------------------------------------------------------------
# legality feedback


def test_legality_feedback_downweights_legal_explanations(reduced, reduced_state):
    cfg = reduced
    # the human thinks its hand may hold salmon (p=.5) or be empty (p=.5);
    # a rejected place-to-trash rules the salmon branch out
    belief = belief_from_state(cfg, reduced_state)
    f = np.zeros_like(belief.factors["human_hand"])
    f[cfg.value_index("human_hand", "none")] = 0.5
    f[cfg.value_index("human_hand", "salmon")] = 0.5
    belief.factors["human_hand"] = f
    out = legality_feedback(cfg, belief, reduced_state, TaskAction("human", "place", target="trash"))
    assert out.factors["human_hand"][cfg.value_index("human_hand", "none")] > 0.99


def test_legality_feedback_escapes_contradicted_delta_belief(reduced, reduced_state):
    cfg = reduced
    # confidently wrong: the human is sure it holds salmon, but the hand is
    # empty and the world rejected the place.  The whole believed support
    # says "legal", so the per-factor fallback must move the mass.
    believed = with_values(cfg, reduced_state, {"human_hand": "salmon"})
    belief = belief_from_state(cfg, believed)
    out = legality_feedback(cfg, belief, reduced_state, TaskAction("human", "place", target="trash"))
    assert out.factors["human_hand"].argmax() == cfg.value_index("human_hand", "none")


def test_legality_feedback_posterior_weights_illegal_values(reduced, reduced_state):
    cfg = reduced
    belief = belief_from_state(cfg, reduced_state)
    action = TaskAction("human", "pick", source="cutting_board")  # board is empty: illegal
    out = legality_feedback(cfg, belief, reduced_state, action)
    # the empty board is the (already believed) explanation; nothing moves
    assert out.factors["cutting_board"].argmax() == cfg.value_index("cutting_board", "none")


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_legality_feedback_returns_distributions(seed):
    cfg = load_config("reduced")
    rng = np.random.default_rng(seed)
    template = initial_state(cfg, order_seed=0)
    belief = _random_sparse_belief(cfg, rng)
    acts = [a for a in legal_actions(cfg, belief.modal_state(cfg, template), "human") if a.verb != "noop"]
    if not acts:
        return
    action = acts[int(rng.integers(len(acts)))]
    out = legality_feedback(cfg, belief, template, action)
    for a, f in out.factors.items():
        assert abs(f.sum() - 1.0) < 1e-9
        assert np.all(f >= 0.0)
