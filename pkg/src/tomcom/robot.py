"""Robot task policy: replan every tick against the plan oracle.

The robot knows the true state, so its policy is simple: take one of the
verified plan-reducing actions (random tie-break from its own seeded
stream), fall back to the oracle's unstick search when gated, and noop
otherwise.  `state_value` is the shared scalar used to rate rollout leaf
states: the reward still collectable from here minus the work it costs.
"""

from __future__ import annotations

import numpy as np

from .config import TaskConfig
from .domain import (
    TaskAction,
    WorldState,
    optimal_actions,
    remaining_plan_length,
    unstick_action,
)


def state_value(cfg: TaskConfig, state: WorldState) -> float:
    """Collectable reward minus the ticks the remaining work costs.

    Step cost is charged per tick while both agents work in parallel, so
    a plan of N actions costs about N/2 ticks.
    """
    n_orders = sum(1 for o in state.orders if o.recipe_id is not None)
    return cfg.rewards.serve_reward * n_orders + cfg.rewards.step_cost * remaining_plan_length(cfg, state) / 2.0


def robot_act(cfg: TaskConfig, state: WorldState, rng) -> TaskAction:
    """One robot decision; deterministic given the rng stream."""
    acts = optimal_actions(cfg, state, "robot", verified=True)
    if acts:
        return acts[int(rng.integers(len(acts)))]
    unstick = unstick_action(cfg, state, "robot")
    return unstick if unstick is not None else TaskAction.noop("robot")


class RobotPolicy:
    """Stateful wrapper holding the robot's action rng stream."""

    def __init__(self, cfg: TaskConfig, rng):
        self.cfg = cfg
        self.rng = rng

    def act(self, state: WorldState) -> TaskAction:
        return robot_act(self.cfg, state, self.rng)
