"""Second-order belief tracking: the robot's estimate of the human's belief.

The estimate is a Dirichlet per aspect.  Each tick the robot samples
candidate human beliefs, advances them through what the human saw and did
(predicted perception from the measured gaze, the shared dynamics, and a
softmax action likelihood), and moment-matches the weighted cloud back
into Dirichlets.  `belief_deviation` summarizes where the estimate puts
mass away from the truth; the communication planner keys off it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief import (
    BeliefState,
    Observation,
    PerceptionModel,
    belief_observe,
    belief_predict,
    legality_feedback,
)
from .config import TaskConfig
from .domain import TaskAction, WorldState, get_index, legal_actions, state_key
from .human import DecisionModel, rollout_return, softmax_probs

# positivity guard only: a corner mixture is represented by a Dirichlet
# with tiny total concentration, and any visible floor would drag its
# mean toward uniform
ALPHA_FLOOR = 1e-6
ALPHA_CAP = 1e4

# likelihood assigned to an observed action that is not even legal under a
# sampled belief (the sample is badly wrong, not impossible: the human may
# have attempted-and-failed)
MIN_ACTION_LIK = 1e-3

# per-factor support mass kept when pushing dense Dirichlet samples through
# the dynamics; exact enumeration over full supports is combinatorial
SUPPORT_MASS = 0.98

# below this total concentration a Dirichlet factor is treated as a mixture
# of simplex corners: samples are drawn as exact corners so the refit keeps
# the corner structure instead of reading the between-corner spread as a
# high concentration
CORNER_TOTAL = 0.5

# per-tick probability that the human's recipe memory switches to a fresh
# draw from the prior; keeps a regeneration floor under rare hypotheses so
# the sampled filter can pick them back up when the evidence turns
SWITCH_RATE = 0.05


@dataclass
class DirichletFactor:
    aspect: str
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if np.any(self.alpha <= 0):
            raise ValueError(f"alpha must be positive for {self.aspect}")

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()


@dataclass
class EstimatedBelief:
    factors: dict  # aspect -> DirichletFactor

    def copy(self) -> "EstimatedBelief":
        return EstimatedBelief(
            {a: DirichletFactor(a, f.alpha.copy()) for a, f in self.factors.items()}
        )


@dataclass
class BeliefSampleSet:
    samples: list  # list[BeliefState]
    weights: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)

    def ess(self) -> float:
        w = self.weights
        return float(1.0 / np.sum(w * w)) if w.size else 0.0


def init_estimate(cfg: TaskConfig, alpha0: float = 1.0) -> EstimatedBelief:
    return EstimatedBelief(
        {a: DirichletFactor(a, np.full(len(dom), alpha0)) for a, dom in cfg.aspects.items()}
    )


def estimate_from_belief(cfg: TaskConfig, belief: BeliefState, concentration: float = ALPHA_CAP) -> EstimatedBelief:
    """Confident estimate centered on a known belief (e.g. the true start)."""
    return EstimatedBelief(
        {
            a: DirichletFactor(a, np.maximum(concentration * f / f.sum(), ALPHA_FLOOR))
            for a, f in belief.factors.items()
        }
    )


def _sample_factor(alpha: np.ndarray, rng) -> np.ndarray:
    """One Dirichlet draw, robust to tiny alphas.

    Below CORNER_TOTAL the distribution is effectively a mixture of
    corners with weights alpha/Σalpha, so a corner is drawn directly;
    gamma draws there would land at in-between points whose spread the
    refit misreads as concentration.
    """
    total = alpha.sum()
    if total < CORNER_TOTAL:
        mean = alpha / total
        f = np.zeros_like(alpha)
        f[int(rng.choice(len(alpha), p=mean))] = 1.0
        return f
    g = rng.standard_gamma(alpha)
    z = g.sum()
    if np.isfinite(z) and z > 0.0:
        return g / z
    mean = alpha / total
    f = np.zeros_like(alpha)
    f[int(rng.choice(len(alpha), p=mean))] = 1.0
    return f


def _corner_allocation(mean: np.ndarray, n: int, rng) -> np.ndarray:
    """Corner index per sample, proportions matched deterministically.

    Largest-remainder rounding of mean*n keeps the realized corner
    frequencies within 1/n of the target; independent draws would leave
    rare corners (a few expected samples) absent by chance, and the
    reweight step cannot revive a hypothesis that has no sample.  The
    assignment order is shuffled so corner choices stay independent
    across factors.
    """
    target = mean * n
    counts = np.floor(target).astype(int)
    rem = n - counts.sum()
    if rem > 0:
        order = np.argsort(target - counts)[::-1]
        counts[order[:rem]] += 1
    return rng.permutation(np.repeat(np.arange(len(mean)), counts))


def sample_beliefs(est: EstimatedBelief, n: int, rng) -> BeliefSampleSet:
    columns = {}
    for a, f in est.factors.items():
        if f.alpha.sum() < CORNER_TOTAL:
            idx = _corner_allocation(f.mean(), n, rng)
            col = np.zeros((n, len(f.alpha)))
            col[np.arange(n), idx] = 1.0
            columns[a] = col
        else:
            columns[a] = np.stack([_sample_factor(f.alpha, rng) for _ in range(n)])
    samples = [BeliefState({a: columns[a][i] for a in est.factors}) for i in range(n)]
    return BeliefSampleSet(samples, np.full(n, 1.0 / n))


@dataclass
class ObservationContext:
    """What the robot knows about the human's perception this tick."""

    state: WorldState  # the true state the human looked at
    attention: set  # measured gaze, as aspect ids
    perception: PerceptionModel


def _expected_observe(cfg: TaskConfig, belief: BeliefState, ctx: ObservationContext) -> BeliefState:
    """Expected Bayes update for gazing at the truth.

    With reveal probability r each attended aspect is updated with weight
    r and left alone with weight 1−r (the filter's expectation over the
    reveal coin, which the robot cannot see).
    """
    r = ctx.perception.reveal_prob
    if r <= 0.0 or not ctx.attention:
        return belief
    revealed = {a: get_index(cfg, ctx.state, a) for a in ctx.attention}
    obs = Observation(set(ctx.attention), revealed, ctx.state.tick)
    updated = belief_observe(cfg, belief, obs, ctx.perception)
    if r >= 1.0:
        return updated
    out = belief.copy()
    for a in ctx.attention:
        out.factors[a] = (1.0 - r) * belief.factors[a] + r * updated.factors[a]
    return out


def propagate(
    cfg: TaskConfig,
    samples: BeliefSampleSet,
    human_action: TaskAction,
    ctx: ObservationContext,
    robot_policy_dist: list[tuple[TaskAction, float]] | None = None,
) -> BeliefSampleSet:
    """Advance every sampled belief one tick: observe, then transition."""
    out = []
    for b in samples.samples:
        b = _expected_observe(cfg, b, ctx)
        b = belief_predict(cfg, b, ctx.state, human_action, robot_policy_dist, SUPPORT_MASS)
        out.append(b)
    return BeliefSampleSet(out, samples.weights.copy(), dict(samples.flags))


def _systematic_resample(weights: np.ndarray, rng) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions)


# belief-mixture likelihood: per sample, at most this many dispersed
# factors are enumerated jointly (ranked by dispersion), with at most this
# many values each; the rest stay at their modal value
LIK_MAX_FACTORS = 3
LIK_MAX_VALUES = 3
LIK_SUPPORT_MASS = 0.95


def _policy_state(cfg: TaskConfig, state: WorldState, observed_action: TaskAction) -> WorldState:
    """Canonicalize recipe memory the policy cannot read.

    The planner only consults the believed variant of recipes that are
    currently ordered (or being assembled right now); pinning the rest to
    the true variant collapses otherwise-distinct states onto one cache
    entry without changing the action distribution.
    """
    from .belief import _as_state  # local import to avoid a cycle

    relevant = {
        cfg.recipe_aspect(slot.recipe_id)
        for slot in state.orders
        if slot.recipe_id is not None
    }
    if observed_action.verb == "assemble":
        relevant.add(cfg.recipe_aspect(observed_action.source))
    resets = {
        a: 0
        for a in cfg.recipe_aspects
        if a not in relevant and get_index(cfg, state, a) != 0
    }
    return _as_state(cfg, state, resets) if resets else state


def _policy_prob(
    cfg: TaskConfig,
    state: WorldState,
    observed_action: TaskAction,
    model: DecisionModel,
    cache: dict,
) -> float:
    state = _policy_state(cfg, state, observed_action)
    key = state_key(cfg, state)
    p = cache.get(key)
    if p is None:
        actions = legal_actions(cfg, state, "human")
        q = {a: rollout_return(cfg, state, a, model) for a in actions}
        acts, probs = softmax_probs(q, model.temperature)
        p = dict(zip(acts, probs)).get(observed_action, MIN_ACTION_LIK)
        cache[key] = p
    return p


def action_likelihoods(
    cfg: TaskConfig,
    samples: BeliefSampleSet,
    observed_action: TaskAction,
    model: DecisionModel,
    template: WorldState,
    cache: dict | None = None,
) -> np.ndarray:
    """p(observed action | sampled belief) per sample.

    The likelihood mixes the policy over the states the sample considers
    plausible: Σ_s b(s) π(a|s).  Using only the modal state instead would
    make every sample drawn from the same dispersed prior look identical
    and the filter could never pick up gradual evidence.  Combinatorics
    are bounded by enumerating the few most dispersed factors only; the
    policy at each enumerated state is cached by state key.
    """
    from .belief import _as_state, _support

    if cache is None:
        cache = {}
    lik = np.empty(len(samples.samples))
    for i, b in enumerate(samples.samples):
        modal = b.modal_values()
        dispersion = {a: 1.0 - float(np.max(f)) for a, f in b.factors.items()}
        spread = sorted(
            (a for a, d in dispersion.items() if d > 0.05),
            key=lambda a: -dispersion[a],
        )[:LIK_MAX_FACTORS]
        combos = [(dict(modal), 1.0)]
        for a in spread:
            support = _support(b.factors[a], LIK_SUPPORT_MASS)[:LIK_MAX_VALUES]
            z = sum(p for _, p in support)
            nxt = []
            for values, prob in combos:
                for idx, p in support:
                    v = dict(values)
                    v[a] = idx
                    nxt.append((v, prob * p / z))
            combos = nxt
        total = 0.0
        for values, prob in combos:
            st = _as_state(cfg, template, values)
            total += prob * _policy_prob(cfg, st, observed_action, model, cache)
        lik[i] = max(total, MIN_ACTION_LIK)
    return lik


def corner_marginals(
    cfg: TaskConfig,
    samples: BeliefSampleSet,
    weights: np.ndarray,
    observed_action: TaskAction,
    model: DecisionModel,
    template: WorldState,
    priors: dict,
    cache: dict,
) -> dict:
    """Rao-Blackwellized posterior marginals for corner-mixture factors.

    Each sample carries one drawn corner per such factor; refitting from
    the draws alone is noisy exactly when it matters (a rare hypothesis
    held by two or three samples drags the other factors' marginals with
    it).  Since a corner factor enters the likelihood only through which
    corner it sits at, the sum over its values can be done analytically
    per sample: p_i(v) ∝ prior(v) · π(a | sample i with the factor at v).
    """
    from .belief import _as_state

    out = {}
    modals = [b.modal_values() for b in samples.samples]
    order = list(modals[0]) if modals else []
    for aspect, prior in priors.items():
        cond = np.empty((len(samples.samples), len(prior)))
        rows: dict[tuple, np.ndarray] = {}
        for i, modal in enumerate(modals):
            # samples sharing modal values elsewhere get identical rows
            # (the probed factor itself is overridden below)
            key = tuple(modal[a] for a in order if a != aspect)
            row = rows.get(key)
            if row is None:
                probe = dict(modal)
                row = np.empty(len(prior))
                for v in range(len(prior)):
                    probe[aspect] = v
                    st = _as_state(cfg, template, probe)
                    row[v] = prior[v] * max(
                        _policy_prob(cfg, st, observed_action, model, cache), MIN_ACTION_LIK
                    )
                row /= row.sum()
                rows[key] = row
            cond[i] = row
        m = weights @ cond
        out[aspect] = m / m.sum()
    return out


def reweight_by_action(
    cfg: TaskConfig,
    samples: BeliefSampleSet,
    observed_action: TaskAction,
    model: DecisionModel,
    template: WorldState,
    rng,
    corner_priors: dict | None = None,
) -> BeliefSampleSet:
    """Bayes step on the observed human action, then systematic resampling.

    `corner_priors` (aspect -> prior mean) requests Rao-Blackwellized
    marginals for those factors, left in flags["rb_means"] for the refit.
    """
    if model.temperature <= 0.0:
        # uniform policy: the action carries no information
        return BeliefSampleSet(list(samples.samples), samples.weights.copy(), dict(samples.flags))
    cache: dict[tuple, float] = {}
    lik = action_likelihoods(cfg, samples, observed_action, model, template, cache)
    w = samples.weights * lik
    flags = dict(samples.flags)
    z = w.sum()
    if not np.isfinite(z) or z <= 0.0:
        flags["degenerate_weights"] = True
        w = np.full(len(w), 1.0 / len(w))
    else:
        w = w / z
    ess = float(1.0 / np.sum(w * w))
    flags["ess"] = ess
    if corner_priors:
        flags["rb_means"] = corner_marginals(
            cfg, samples, w, observed_action, model, template, corner_priors, cache
        )
    if ess >= 0.5 * len(w):
        # weights are nearly flat; resampling here would only inject
        # random-walk noise into factors the action said nothing about
        return BeliefSampleSet(list(samples.samples), w, flags)
    idx = _systematic_resample(w, rng)
    resampled = [samples.samples[j].copy() for j in idx]
    return BeliefSampleSet(resampled, np.full(len(idx), 1.0 / len(idx)), flags)


def moment_match(cfg: TaskConfig, samples: BeliefSampleSet) -> EstimatedBelief:
    """Fit one Dirichlet per aspect to the weighted belief samples.

    The mean is matched exactly; the concentration comes from the
    component-averaged second-moment relation.  Zero-variance factors get
    the maximum concentration at the sample mean.
    """
    w = samples.weights / samples.weights.sum()
    factors = {}
    for aspect in samples.samples[0].factors:
        pts = np.stack([b.factors[aspect] for b in samples.samples])
        m = w @ pts
        e2 = w @ (pts * pts)
        denom = e2 - m * m
        valid = denom > 1e-12
        if np.any(valid):
            s_k = (m[valid] - e2[valid]) / denom[valid]
            s = float(np.mean(s_k))
            s = min(max(s, 1e-3), ALPHA_CAP)
        else:
            s = ALPHA_CAP
        alpha = np.maximum(s * m, ALPHA_FLOOR)
        total = alpha.sum()
        if total > ALPHA_CAP:
            alpha = alpha * (ALPHA_CAP / total)
        factors[aspect] = DirichletFactor(aspect, alpha)
    return EstimatedBelief(factors)


def expected_belief(est: EstimatedBelief) -> BeliefState:
    return BeliefState({a: f.mean() for a, f in est.factors.items()})


def belief_deviation(cfg: TaskConfig, est: EstimatedBelief, true_state: WorldState) -> dict:
    """Per aspect: estimated probability the human is wrong about it."""
    return {
        a: float(1.0 - f.mean()[get_index(cfg, true_state, a)])
        for a, f in est.factors.items()
    }


class BeliefTracker:
    """Per-session orchestration of the sample/update/refit cycle.

    `update` consumes one tick of evidence — the state the human looked
    at, the measured gaze, the human's action and the robot's action —
    and refreshes the Dirichlet estimate.  Diagnostics (deviations,
    effective sample size, degeneracy flags) are returned for logging.
    """

    def __init__(
        self,
        cfg: TaskConfig,
        rng,
        n_samples: int = 256,
        perception: PerceptionModel | None = None,
        decision: DecisionModel | None = None,
        initial_belief: BeliefState | None = None,
        concentration: float = 200.0,
        recipe_trust: float = 6.0,
        recipe_scale: float = 0.01,
    ):
        self.cfg = cfg
        self.rng = rng
        self.n_samples = n_samples
        self.perception = perception or PerceptionModel()
        self.decision = decision or DecisionModel()
        if initial_belief is not None:
            # the human saw the same starting kitchen, so location and
            # order factors start confident; what the human *remembers*
            # about recipes is exactly the unknown, so those stay vague
            self.estimate = estimate_from_belief(cfg, initial_belief, concentration)
            # recipe memory is either right or confidently wrong, so the
            # prior is a sparse Dirichlet: mean recipe_trust:1:...:1 toward
            # the true variant, total concentration < 1 so samples sit near
            # the simplex corners (a mixture of near-delta beliefs)
            for a in cfg.recipe_aspects:
                alpha = np.full(len(cfg.domain(a)), recipe_scale)
                alpha[0] = recipe_trust * recipe_scale
                self.estimate.factors[a] = DirichletFactor(a, alpha)
            # switch-rate regeneration target: the human's recipe memory
            # can silently change, so a little prior mass is mixed back in
            # every tick (otherwise a hypothesis the evidence once ruled
            # out could never be recovered)
            self._switch_prior = {
                a: self.estimate.factors[a].mean() for a in cfg.recipe_aspects
            }
        else:
            self.estimate = init_estimate(cfg)
            self._switch_prior = {}

    def update(
        self,
        prev_state: WorldState,
        attention: set,
        human_action: TaskAction,
        robot_action: TaskAction,
        human_degraded: bool = False,
    ) -> dict:
        cfg = self.cfg
        # switch regeneration happens before the tick's evidence, so the
        # reported estimate is post-evidence (the mix would otherwise blur
        # a posterior the likelihood had just sharpened)
        for a, prior in self._switch_prior.items():
            f = self.estimate.factors[a]
            s = f.alpha.sum()
            mixed = (1.0 - SWITCH_RATE) * f.mean() + SWITCH_RATE * prior
            self.estimate.factors[a] = DirichletFactor(a, np.maximum(s * mixed, ALPHA_FLOOR))
        ctx = ObservationContext(prev_state, set(attention), self.perception)
        samples = sample_beliefs(self.estimate, self.n_samples, self.rng)
        observed = BeliefSampleSet(
            [_expected_observe(cfg, b, ctx) for b in samples.samples],
            samples.weights,
        )
        corner_priors = {
            a: self.estimate.factors[a].mean()
            for a in self._switch_prior
            if self.estimate.factors[a].alpha.sum() < CORNER_TOTAL
        }
        corner_totals = {a: self.estimate.factors[a].alpha.sum() for a in corner_priors}
        # the policy reads a recipe memory only while that recipe is
        # ordered; the conditional for every other corner factor is just
        # its prior, so only the ordered ones are worth probing
        ordered = {
            cfg.recipe_aspect(slot.recipe_id)
            for slot in prev_state.orders
            if slot.recipe_id is not None
        }
        probe_priors = {a: m for a, m in corner_priors.items() if a in ordered}
        samples = reweight_by_action(
            cfg, observed, human_action, self.decision, prev_state, self.rng,
            probe_priors,
        )
        effective = human_action
        if human_degraded:
            samples = BeliefSampleSet(
                [legality_feedback(cfg, b, prev_state, human_action, SUPPORT_MASS) for b in samples.samples],
                samples.weights,
                samples.flags,
            )
            effective = TaskAction.noop("human")
        robot_dist = [(robot_action, 1.0)] if robot_action.verb != "noop" else None
        samples = BeliefSampleSet(
            [belief_predict(cfg, b, prev_state, effective, robot_dist, SUPPORT_MASS) for b in samples.samples],
            samples.weights,
            samples.flags,
        )
        self.estimate = moment_match(cfg, samples)
        # Rao-Blackwellized marginals override the sampled refit for the
        # corner factors (recipe memory is untouched by the dynamics, so
        # the pre-predict marginals are still exact here); skipped on
        # degraded ticks, where legality feedback has already reshaped
        # the sampled recipe factors
        rb_means = {} if human_degraded else samples.flags.get("rb_means", {})
        for a, s in corner_totals.items():
            # keep the factor's pre-update (corner-regime) concentration:
            # a unanimous resampled cloud would otherwise refit to a huge
            # concentration and the factor would stop being sampled as a
            # corner mixture
            if a in rb_means:
                m = rb_means[a]
            elif not human_degraded:
                # unprobed corner factor: the action said nothing about
                # it, so the posterior marginal is the prior (the sampled
                # refit would only add resampling noise here)
                m = corner_priors[a]
            else:
                m = self.estimate.factors[a].mean()
            self.estimate.factors[a] = DirichletFactor(a, np.maximum(s * m, ALPHA_FLOOR))
        deviations = belief_deviation(cfg, self.estimate, prev_state)
        return {
            "deviations": deviations,
            "ess": samples.flags.get("ess", float(self.n_samples)),
            "degenerate_weights": samples.flags.get("degenerate_weights", False),
        }

    def apply_observation(self, state: WorldState, aspects: set) -> None:
        """Collapse the estimate on aspects a signal just revealed."""
        for a in aspects:
            alpha = np.full_like(self.estimate.factors[a].alpha, ALPHA_FLOOR)
            alpha[get_index(self.cfg, state, a)] = ALPHA_CAP
            self.estimate.factors[a] = DirichletFactor(a, alpha)
