"""Empirical counterparts of the solver's inputs.

Visitation distributions are estimated from batch trajectory datasets;
transition models are estimated from forward-model exploration.  Exact mode
(no estimation, true quantities passed through) is first-class because small
problems are often run with exact policy and transition values.
"""

from dataclasses import dataclass, field

import numpy as np

from . import feedback as fb
from .mdp import (
    MdpSpec,
    Trajectory,
    backward_induction,
    policy_visitation,
    sample_trajectories,
    trajectory_visitation,
)


@dataclass
class TrajectoryDataset:
    """A batch of trajectories emitted by one policy in one environment."""

    trajectories: list
    source: str = ""

    def __post_init__(self):
        if self.trajectories:
            H = self.trajectories[0].horizon
            for i, tr in enumerate(self.trajectories):
                if tr.horizon != H:
                    raise ValueError(f"trajectory {i} has horizon {tr.horizon} != {H}")

    def __len__(self):
        return len(self.trajectories)


def estimate_visitation(dataset, num_states, num_actions):
    """Empirical visitation frequencies; each step slice sums to one."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot estimate a visitation from an empty dataset")
    H = dataset.trajectories[0].horizon
    counts = np.zeros((H, num_states, num_actions))
    for tr in dataset.trajectories:
        for h in range(H):
            counts[h, tr.states[h], tr.actions[h]] += 1.0
    return counts / n


class ForwardModel:
    """Opaque sampler around a hidden MDP; counts every trajectory drawn."""

    def __init__(self, mdp, seed):
        self._mdp = mdp
        self._seed = seed if isinstance(seed, tuple) else (seed,)
        self.queries = 0

    @property
    def num_states(self):
        return self._mdp.num_states

    @property
    def num_actions(self):
        return self._mdp.num_actions

    @property
    def horizon(self):
        return self._mdp.horizon

    @property
    def start_state(self):
        return self._mdp.start_state

    def rollout(self, policy):
        # one fresh seed per query keeps draws independent yet reproducible
        (traj,) = sample_trajectories(
            self._mdp, policy, 1, self._seed + (self.queries,)
        )
        self.queries += 1
        return traj


def transitions_from_counts(counts, start_state):
    """Normalize visit counts into a transition tensor.

    Rows of unvisited (s, a, h) fall back to the uniform distribution, which
    keeps the estimate a valid MDP and keeps planning on it total.
    """
    counts = np.asarray(counts, dtype=float)
    H, S, A, S2 = counts.shape
    if S != S2:
        raise ValueError(f"count tensor shape {counts.shape} is not (H, S, A, S)")
    totals = counts.sum(axis=-1, keepdims=True)
    p_hat = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / S)
    return MdpSpec(S, A, H, start_state, p_hat)


def reachable_state_mask(mdp):
    """Which states can be occupied at each step, under any policy."""
    H, S, _ = mdp.shape
    mask = np.zeros((H, S), dtype=bool)
    mask[0, mdp.start_state] = True
    for h in range(H - 1):
        support = (mdp.transitions[h] > 0).any(axis=1)  # (S, A, S') -> (S, S')
        reach = np.zeros(S, dtype=bool)
        for s in np.flatnonzero(mask[h]):
            reach |= support[s]
        mask[h + 1] = reach
    return mask


def _least_visited_target(visit_counts, miss_counts, p_hat_mdp):
    """Lowest-priority (h, s, a) among triples reachable under the estimate.

    Triples that the current model deems unreachable (for instance any state
    other than the start state at the first step) would pin the target
    forever, so they are excluded.  Failed attempts also count against a
    triple: cells that look reachable only through unvisited rows of the
    estimate would otherwise keep winning the zero-count tie and starve the
    attainable ones.
    """
    reachable = reachable_state_mask(p_hat_mdp)
    priority = np.where(reachable[:, :, None], visit_counts + miss_counts, np.inf)
    flat = np.argmin(priority)  # ties resolve to the lowest (h, s, a) index
    return np.unravel_index(flat, visit_counts.shape)


def _reach_policy(p_hat_mdp, target):
    """Policy maximizing the probability of visiting one (h, s, a) triple."""
    h, s, a = target
    goal = np.zeros(p_hat_mdp.shape)
    goal[h, s, a] = 1.0
    _, policy, _ = backward_induction(p_hat_mdp, goal)
    return policy


def estimate_transitions(
    counts=None, model=None, budget=0, strategy="count-greedy", start_state=0
):
    """Estimate a transition model, either from given counts or by exploring.

    With a forward model, each of ``budget`` episodes follows either a
    uniformly random policy or (default) a count-greedy policy that maximizes
    the expected number of visits to the currently least-visited (s, a, h)
    triple under the running estimate.  All randomness comes from the model's
    own seeded sampler, so the estimate is deterministic.
    """
    if counts is not None:
        if model is not None:
            raise ValueError("pass either counts or a forward model, not both")
        return transitions_from_counts(counts, start_state)
    if model is None:
        raise ValueError("need transition counts or a forward model")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    S, A, H = model.num_states, model.num_actions, model.horizon
    counts = np.zeros((H, S, A, S))
    visit_counts = np.zeros((H, S, A))
    miss_counts = np.zeros((H, S, A))
    uniform = np.full((H, S, A), 1.0 / A)
    for _ in range(budget):
        target = None
        if strategy == "uniform":
            policy = uniform
        elif strategy == "count-greedy":
            p_hat = transitions_from_counts(counts, model.start_state)
            target = _least_visited_target(visit_counts, miss_counts, p_hat)
            policy = _reach_policy(p_hat, target)
        else:
            raise ValueError(f"unknown exploration strategy {strategy!r}")
        traj = model.rollout(policy)
        for h in range(H):
            s, a, s2 = traj.states[h], traj.actions[h], traj.states[h + 1]
            counts[h, s, a, s2] += 1.0
            visit_counts[h, s, a] += 1.0
        if target is not None:
            h, s, a = target
            if traj.states[h] != s or traj.actions[h] != a:
                miss_counts[target] += 1.0
    return transitions_from_counts(counts, model.start_state)


@dataclass(frozen=True)
class RawFeedback:
    """A feedback statement carrying the true objects behind it.

    Exact mode turns this directly into a constraint; estimated mode replaces
    policies by dataset frequencies and demonstration environments by
    explored transition estimates.
    """

    variant: fb.Variant
    env: MdpSpec = None
    policy1: np.ndarray = field(default=None, repr=False)
    policy2: np.ndarray = field(default=None, repr=False)
    traj1: Trajectory = None
    traj2: Trajectory = None
    t: float = 0.0
    ratio: float = None


def _exact_constraint(raw):
    v = raw.variant
    if v is fb.Variant.DEMONSTRATION:
        return fb.demonstration_from_policy(raw.env, raw.policy1, t=raw.t)
    if v is fb.Variant.BAD_POLICY_DEMONSTRATION:
        d = policy_visitation(raw.env, raw.policy1)
        return fb.bad_policy_demonstration(raw.env, d, t=raw.t)
    if v is fb.Variant.TRAJECTORY_COMPARISON:
        S, A = raw.env.num_states, raw.env.num_actions
        d1 = trajectory_visitation(raw.traj1, S, A)
        d2 = trajectory_visitation(raw.traj2, S, A)
        return fb.trajectory_comparison(d1, d2, t=raw.t)
    d1 = policy_visitation(raw.env, raw.policy1)
    d2 = policy_visitation(raw.env, raw.policy2)
    if v is fb.Variant.FRACTIONAL_COMPARISON:
        return fb.fractional_comparison(d1, d2, ratio=raw.ratio)
    return fb.policy_comparison(d1, d2, t=raw.t)


def _estimated_visitation(env, policy, n, seed):
    data = TrajectoryDataset(sample_trajectories(env, policy, n, seed))
    return estimate_visitation(data, env.num_states, env.num_actions)


def estimated_constraint_set(
    feedbacks, mode="estimated", num_trajectories=None, model_budget=0, seed=0
):
    """Build a FeasibleSetSpec from raw feedback.

    ``num_trajectories`` is the dataset size drawn per policy-bearing
    feedback (an int, or a list with one entry per feedback).  Trajectory
    comparisons carry exact path indicators and need no data; demonstration
    variants additionally estimate their environment with ``model_budget``
    forward-model episodes.  Everything is deterministic given the seed.
    """
    feedbacks = list(feedbacks)
    if mode == "exact":
        return fb.FeasibleSetSpec(tuple(_exact_constraint(r) for r in feedbacks))
    if mode != "estimated":
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(num_trajectories, int):
        num_trajectories = [num_trajectories] * len(feedbacks)
    constraints = []
    for i, raw in enumerate(feedbacks):
        v = raw.variant
        if v is fb.Variant.TRAJECTORY_COMPARISON:
            constraints.append(_exact_constraint(raw))  # indicators are exact
            continue
        if num_trajectories is None or num_trajectories[i] is None:
            raise ValueError(f"feedback {i} ({v.name}) has no dataset budget")
        n = num_trajectories[i]
        if n < 1:
            raise ValueError(f"feedback {i} ({v.name}) has dataset budget {n} < 1")
        d1 = _estimated_visitation(raw.env, raw.policy1, n, (seed, i, 1))
        if v is fb.Variant.DEMONSTRATION or v is fb.Variant.BAD_POLICY_DEMONSTRATION:
            model = ForwardModel(raw.env, seed=(seed, i, 0))
            env_hat = estimate_transitions(model=model, budget=model_budget)
            ctor = (
                fb.demonstration
                if v is fb.Variant.DEMONSTRATION
                else fb.bad_policy_demonstration
            )
            constraints.append(ctor(env_hat, d1, t=raw.t))
            continue
        d2 = _estimated_visitation(raw.env, raw.policy2, n, (seed, i, 2))
        if v is fb.Variant.FRACTIONAL_COMPARISON:
            constraints.append(fb.fractional_comparison(d1, d2, ratio=raw.ratio))
        else:
            constraints.append(fb.policy_comparison(d1, d2, t=raw.t))
    return fb.FeasibleSetSpec(tuple(constraints))
