"""Noisy-rational human model: softmax policy, gaze, injections, recovery."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tomcom.belief import belief_from_state
from tomcom.config import load_config
from tomcom.domain import TaskAction, initial_state, step, with_values
from tomcom.human import (
    AttentionModel,
    DecisionModel,
    FalseBeliefInjection,
    SimulatedHuman,
    act,
    q_values,
    softmax_probs,
)


def _q(values):
    return {TaskAction("human", "pick", source=f"i{i}"): v for i, v in enumerate(values)}


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-20, 20), min_size=2, max_size=8),
    st.floats(0.1, 40.0),
)
def test_softmax_matches_analytic_form(values, tau):
    q = _q(values)
    actions, p = softmax_probs(q, tau)
    z = tau * np.array(values)
    want = np.exp(z - z.max())
    want /= want.sum()
    assert np.allclose(p, want, atol=1e-12)
    assert abs(p.sum() - 1.0) < 1e-12


def test_softmax_zero_temperature_is_uniform():
    actions, p = softmax_probs(_q([0.0, 5.0, -3.0]), 0.0)
    assert np.allclose(p, 1.0 / 3.0)


def test_softmax_high_temperature_is_modal():
    actions, p = softmax_probs(_q([1.0, 1.4, 0.2]), 50.0)
    assert p[1] > 0.99


def test_act_is_deterministic_given_rng_stream(reduced, reduced_state):
    belief = belief_from_state(reduced, reduced_state)
    model = DecisionModel(n_samples=4, horizon=4)
    a1, _ = act(reduced, belief, reduced_state, model, np.random.default_rng(3))
    a2, _ = act(reduced, belief, reduced_state, model, np.random.default_rng(3))
    assert a1 == a2


def test_q_values_cover_modal_legal_actions(reduced, reduced_state):
    belief = belief_from_state(reduced, reduced_state)
    q = q_values(reduced, belief, reduced_state, DecisionModel(n_samples=2, horizon=3), np.random.default_rng(0))
    from tomcom.domain import legal_actions

    assert set(q) == set(legal_actions(reduced, reduced_state, "human"))


def test_injection_overwrites_factor_at_onset(reduced, reduced_state):
    human = SimulatedHuman(
        reduced,
        reduced_state,
        np.random.default_rng(0),
        injections=[FalseBeliefInjection("recipe_salmon_nigiri", 1, onset_tick=2)],
    )
    state = reduced_state
    for _ in range(3):
        a_h, _ = human.tick(state)
        prev = state
        state, events = step(reduced, state, a_h, TaskAction.noop("robot"))
        human.after_step(prev, a_h, events["human_degraded"], robot_action=TaskAction.noop("robot"))
    f = human.belief.factors["recipe_salmon_nigiri"]
    assert f.argmax() == 1 and f.max() > 0.9


def test_blind_injection_filters_direct_observation(reduced, reduced_state):
    cfg = reduced
    wrong = cfg.value_index("human_hand", "rice")
    human = SimulatedHuman(
        cfg,
        reduced_state,
        np.random.default_rng(0),
        injections=[FalseBeliefInjection("human_hand", wrong, onset_tick=0, blind=True)],
    )
    human.forced_attention = {"human_hand"}
    human._apply_injections(0)
    attention = human.choose_attention(reduced_state)
    from tomcom.belief import PerceptionModel, perceive

    obs = perceive(cfg, reduced_state, attention, PerceptionModel(), human.rng)
    for aspect in human._blind_aspects(0):
        obs.revealed_values.pop(aspect, None)
    assert "human_hand" not in obs.revealed_values


def test_signal_overrides_blindness(reduced, reduced_state):
    human = SimulatedHuman(
        reduced,
        reduced_state,
        np.random.default_rng(0),
        injections=[FalseBeliefInjection("recipe_salmon_nigiri", 1, onset_tick=0, blind=True)],
    )
    human._apply_injections(0)
    taken = human.receive_signal({"recipe_salmon_nigiri"}, uptake_prob=1.0)
    assert taken
    assert not human.injections[0].blind
    assert "recipe_salmon_nigiri" in human.forced_attention


def test_human_recovers_from_blind_location_injection(reduced, reduced_state):
    # the human falsely believes it holds rice (blind: it cannot see its
    # own hand).  Attempted actions keep failing; legality feedback must
    # walk the belief back so the human does not loop forever.
    cfg = reduced
    wrong = cfg.value_index("human_hand", "rice")
    human = SimulatedHuman(
        cfg,
        reduced_state,
        np.random.default_rng(1),
        decision=DecisionModel(n_samples=4, horizon=4, temperature=10.0),
        injections=[FalseBeliefInjection("human_hand", wrong, onset_tick=0, blind=True)],
    )
    state = reduced_state
    degraded_run = 0
    max_run = 0
    for _ in range(15):
        a_h, _ = human.tick(state)
        prev = state
        state, events = step(cfg, state, a_h, TaskAction.noop("robot"))
        degraded_run = degraded_run + 1 if events["human_degraded"] else 0
        max_run = max(max_run, degraded_run)
        human.after_step(prev, a_h, events["human_degraded"], robot_action=TaskAction.noop("robot"))
    assert max_run <= 2
    assert human.belief.factors["human_hand"].argmax() == cfg.value_index("human_hand", "none")


def test_gaze_always_covers_order_display(reduced, reduced_state):
    human = SimulatedHuman(reduced, reduced_state, np.random.default_rng(0))
    att = human.choose_attention(reduced_state)
    assert set(reduced.order_aspects) <= att
    assert att <= set(reduced.observable_aspects)
