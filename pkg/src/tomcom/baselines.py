"""Comparison concepts: error-triggered proposals and a ToM threshold rule.

DEV reacts to the last committed human error by proposing the next few
optimal actions.  The threshold concept fires a mapped signal whenever
the tracked belief deviation of any aspect crosses a threshold,
deliberately without asking whether the aspect matters right now — that
missing relevance term is exactly what the planner-based concept adds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .comm import NONE_SIGNAL, CommAction
from .config import TaskConfig
from .domain import TaskAction, WorldState, apply_single, optimal_actions, remaining_plan_length, unstick_action
from .inference import EstimatedBelief, belief_deviation


@dataclass
class DevConfig:
    k: int = 1  # number of proposed next actions, 1..5

    def __post_init__(self):
        if not 1 <= self.k <= 5:
            raise ValueError("k must be in [1, 5]")


@dataclass
class DevProposal:
    actions: list  # list[TaskAction], the proposed recovery prefix

    def key(self) -> str:
        return "propose:" + ",".join(a.key() for a in self.actions)


def was_error(cfg: TaskConfig, prev_state: WorldState, action: TaskAction) -> bool:
    """An error is a human action that lengthened the remaining plan."""
    if action.verb == "noop":
        return False
    after, _ = apply_single(cfg, prev_state, action)
    return remaining_plan_length(cfg, after) > remaining_plan_length(cfg, prev_state)


def recovery_plan(cfg: TaskConfig, state: WorldState, k: int) -> list[TaskAction]:
    """First k human actions of an optimal recovery from `state`."""
    out = []
    cur = state
    for _ in range(k):
        acts = optimal_actions(cfg, cur, "human", verified=True)
        a = acts[0] if acts else unstick_action(cfg, cur, "human")
        if a is None:
            break
        out.append(a)
        cur, _ = apply_single(cfg, cur, a)
    return out


def dev_decide(
    cfg: TaskConfig,
    state: WorldState,
    prev_state: WorldState,
    last_human_action: TaskAction,
    dev_cfg: DevConfig,
) -> DevProposal | None:
    """Propose the next k optimal actions iff the last action was an error."""
    if not was_error(cfg, prev_state, last_human_action):
        return None
    return DevProposal(recovery_plan(cfg, state, dev_cfg.k))


@dataclass
class TomThresholdConfig:
    threshold: float = 0.9  # swept over [0.4, 0.99]

    def __post_init__(self):
        if not 0.4 <= self.threshold <= 0.99:
            raise ValueError("threshold must be in [0.4, 0.99]")


def _signal_for_aspect(cfg: TaskConfig, aspect: str, state: WorldState) -> CommAction:
    """Mirror the planner's signal vocabulary: aspect -> correcting signal."""
    if aspect in cfg.recipe_aspects:
        return CommAction("show_recipe", aspect.removeprefix("recipe_"))
    if aspect in cfg.order_aspects:
        from .domain import get_value

        from .config import NONE_VALUE

        value = get_value(cfg, state, aspect)
        if value != NONE_VALUE:
            return CommAction("show_recipe", value)
        return NONE_SIGNAL
    if aspect in cfg.assembly_slot_ids:
        return CommAction("highlight_location", "assembly_board")
    return CommAction("highlight_location", aspect)


def tom_threshold_decide(
    cfg: TaskConfig,
    est: EstimatedBelief,
    true_state: WorldState,
    th_cfg: TomThresholdConfig,
) -> CommAction:
    """Fire at the most-deviating aspect when it crosses the threshold."""
    devs = belief_deviation(cfg, est, true_state)
    aspect = max(devs, key=devs.get)
    if devs[aspect] < th_cfg.threshold:
        return NONE_SIGNAL
    return _signal_for_aspect(cfg, aspect, true_state)
