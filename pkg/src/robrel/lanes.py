"""The three-lane driving benchmark.

A road with three lanes (left, center, right) is driven for five steps.  Each
lane holds one item per step: a ball (B), a square (S), a triangle (T), or
nothing (N).  States pair the current lane with the item found there, giving
12 states; the three actions steer left, keep the lane, or steer right, with
slippery dynamics that depend only on the lane and the action.  Preferences
over items are a three-dimensional feature reward (r_B, r_S, r_T), with N
pinned to zero.

The task is to predict how much the always-right policy is preferred to the
always-left policy from the center lane.  The bundled feedback recipe mixes
three trajectory comparisons on the target road (slacks 0.3, 1, -0.5), two
policy comparisons on a second road starting from the left lane (slacks 0,
0.5), and one demonstration on a third road starting from the right lane
(slack 1).  All six statements are consistent with the reference preference
vector (0.7, 0.1, 0.2).

Item layouts are configurable; the module ships reference layouts chosen so
the reference preference gap is 0.3898 and the feasible set has a strictly
interior reward.
"""

from dataclasses import dataclass, field

import numpy as np

from . import feedback as fb
from .estimation import RawFeedback, estimated_constraint_set
from .mdp import (
    FeatureMap,
    MdpSpec,
    RewardPoint,
    Trajectory,
    deterministic_policy,
    expected_return,
    policy_visitation,
)
from .solver import Hyperparams, RobRelProblem

ITEMS = "BSTN"
LANES = "LCR"
NUM_LANES = 3
NUM_ITEMS = 4
NUM_STATES = NUM_LANES * NUM_ITEMS
NUM_ACTIONS = 3
HORIZON = 5
ACTION_LEFT, ACTION_CENTER, ACTION_RIGHT = 0, 1, 2

# Lane kernel, indexed [from, action, to]: lateral actions succeed w.p. 0.6
# and keep the lane otherwise; the keep action holds w.p. 0.4 and drifts both
# ways; border lanes fold the blocked direction back into the feasible ones.
LANE_KERNEL = np.array(
    [
        # rows per action: steer left / keep lane / steer right
        [[1.0, 0.0, 0.0], [0.55, 0.45, 0.0], [0.3, 0.7, 0.0]],  # from left
        [[0.6, 0.4, 0.0], [0.3, 0.4, 0.3], [0.0, 0.3, 0.7]],  # from center
        [[0.0, 0.6, 0.4], [0.0, 0.45, 0.55], [0.0, 0.0, 1.0]],  # from right
    ]
)

DEFAULT_REWARD = np.array([0.7, 0.1, 0.2])

# Reference layouts, one row per step, one letter per lane (L, C, R).
TARGET_LAYOUT = ("NNN", "SNN", "NNB", "TNN", "NNN")
COMPARISON_LAYOUT = ("NNN", "TBN", "NNT", "NSN", "SNB")
DEMONSTRATION_LAYOUT = ("NNN", "NTB", "BNN", "NNS", "TNN")

TRAJECTORY_SLACKS = (0.3, 1.0, -0.5)
POLICY_SLACKS = (0.0, 0.5)
DEMONSTRATION_SLACK = 1.0


def state_of(lane, item):
    return lane * NUM_ITEMS + item


def parse_layout(rows):
    """Item indices per (step, lane) from rows of letters like "NSB"."""
    rows = list(rows)
    if len(rows) != HORIZON:
        raise ValueError(f"layout needs {HORIZON} rows, got {len(rows)}")
    table = np.empty((HORIZON, NUM_LANES), dtype=int)
    for h, row in enumerate(rows):
        if len(row) != NUM_LANES:
            raise ValueError(f"layout row {h} must have {NUM_LANES} items")
        for lane, ch in enumerate(row):
            if ch not in ITEMS:
                raise ValueError(f"unknown item {ch!r} in layout row {h}")
            table[h, lane] = ITEMS.index(ch)
    return table


def build_road(layout, start_lane):
    """MDP for one road: lane dynamics plus the layout's item labels.

    The item found after a transition is the one occupying the destination
    lane at the next step; past the horizon all lanes read N.
    """
    table = parse_layout(layout)
    p = np.zeros((HORIZON, NUM_STATES, NUM_ACTIONS, NUM_STATES))
    for h in range(HORIZON):
        nxt = table[h + 1] if h + 1 < HORIZON else [ITEMS.index("N")] * NUM_LANES
        for lane in range(NUM_LANES):
            for item in range(NUM_ITEMS):
                s = state_of(lane, item)
                for a in range(NUM_ACTIONS):
                    for lane2 in range(NUM_LANES):
                        p[h, s, a, state_of(lane2, nxt[lane2])] += LANE_KERNEL[
                            lane, a, lane2
                        ]
    start = state_of(start_lane, table[0][start_lane])
    return MdpSpec(NUM_STATES, NUM_ACTIONS, HORIZON, start, p)


def item_feature_map():
    """Feature per state: the item it contains; N maps to the zero reward."""
    index = np.full((HORIZON, NUM_STATES, NUM_ACTIONS), -1, dtype=int)
    for s in range(NUM_STATES):
        item = s % NUM_ITEMS
        if item != ITEMS.index("N"):
            index[:, s, :] = item
    return FeatureMap(index, 3)


def constant_policy(mdp, action):
    return deterministic_policy(
        mdp, np.full((mdp.horizon, mdp.num_states), action, dtype=int)
    )


def lane_trajectory(layout, lanes, actions):
    """A trajectory through given lanes, labeled with the layout's items."""
    table = parse_layout(layout)
    states = []
    for h, lane in enumerate(lanes):
        item = table[h][lane] if h < HORIZON else ITEMS.index("N")
        states.append(state_of(lane, item))
    return Trajectory(states, actions)


@dataclass(frozen=True)
class LanesExperiment:
    """The assembled benchmark: problem, environments and reference answers."""

    target: MdpSpec
    comparison_env: MdpSpec
    demonstration_env: MdpSpec
    feature_map: FeatureMap
    policy_right: np.ndarray = field(repr=False)
    policy_left: np.ndarray = field(repr=False)
    delta_d: np.ndarray = field(repr=False)
    raw_feedback: tuple
    fset: fb.FeasibleSetSpec
    true_reward: RewardPoint
    true_gap: float


def build_lanes(
    target_layout=TARGET_LAYOUT,
    comparison_layout=COMPARISON_LAYOUT,
    demonstration_layout=DEMONSTRATION_LAYOUT,
    reward=DEFAULT_REWARD,
    hyper=None,
):
    """Assemble the benchmark with exact-mode feedback quantities.

    Returns the experiment record and a ready RobRelProblem (hyperparameters
    default to the reference run: 1200 iterations, step size 0.01, dual
    radius 81).
    """
    reward = np.asarray(reward, dtype=float)
    if reward.shape != (3,) or reward.min() < 0 or reward.max() > 1:
        raise ValueError("the item reward must be three values in [0, 1]")
    fmap = item_feature_map()
    r_star = RewardPoint.from_theta(fmap, reward)

    target = build_road(target_layout, start_lane=LANES.index("C"))
    pi_right = constant_policy(target, ACTION_RIGHT)
    pi_left = constant_policy(target, ACTION_LEFT)
    d_right = policy_visitation(target, pi_right)
    d_left = policy_visitation(target, pi_left)
    delta_d = d_right - d_left
    true_gap = expected_return(delta_d, r_star.values)

    # trajectory comparisons on the target road: a straight-ahead path, a
    # right-bound path over the ball, a left-bound path over square and
    # triangle, and a left detour over the square only
    C, L, R = (LANES.index(ch) for ch in "CLR")
    path_ball = lane_trajectory(target_layout, [C, R, R, R, R, R], [ACTION_RIGHT] * 5)
    path_ahead = lane_trajectory(target_layout, [C] * 6, [ACTION_CENTER] * 5)
    path_side = lane_trajectory(target_layout, [C, L, L, L, L, L], [ACTION_LEFT] * 5)
    path_square = lane_trajectory(
        target_layout,
        [C, L, C, C, C, C],
        [ACTION_LEFT, ACTION_RIGHT, ACTION_CENTER, ACTION_CENTER, ACTION_CENTER],
    )
    raw = [
        RawFeedback(
            fb.Variant.TRAJECTORY_COMPARISON,
            env=target,
            traj1=path_side,
            traj2=path_ball,
            t=TRAJECTORY_SLACKS[0],
        ),
        RawFeedback(
            fb.Variant.TRAJECTORY_COMPARISON,
            env=target,
            traj1=path_side,
            traj2=path_ahead,
            t=TRAJECTORY_SLACKS[1],
        ),
        RawFeedback(
            fb.Variant.TRAJECTORY_COMPARISON,
            env=target,
            traj1=path_square,
            traj2=path_ball,
            t=TRAJECTORY_SLACKS[2],
        ),
    ]

    comparison_env = build_road(comparison_layout, start_lane=L)
    raw.append(
        RawFeedback(
            fb.Variant.POLICY_COMPARISON,
            env=comparison_env,
            policy1=constant_policy(comparison_env, ACTION_LEFT),
            policy2=constant_policy(comparison_env, ACTION_CENTER),
            t=POLICY_SLACKS[0],
        )
    )
    raw.append(
        RawFeedback(
            fb.Variant.POLICY_COMPARISON,
            env=comparison_env,
            policy1=constant_policy(comparison_env, ACTION_CENTER),
            policy2=constant_policy(comparison_env, ACTION_RIGHT),
            t=POLICY_SLACKS[1],
        )
    )

    demonstration_env = build_road(demonstration_layout, start_lane=R)
    raw.append(
        RawFeedback(
            fb.Variant.DEMONSTRATION,
            env=demonstration_env,
            policy1=constant_policy(demonstration_env, ACTION_CENTER),
            t=DEMONSTRATION_SLACK,
        )
    )

    fset = estimated_constraint_set(raw, mode="exact")
    if hyper is None:
        hyper = Hyperparams(iterations=1200, step_size=0.01, dual_radius=81.0)
    problem = RobRelProblem(delta_d, fset, hyper, feature_map=fmap)
    experiment = LanesExperiment(
        target=target,
        comparison_env=comparison_env,
        demonstration_env=demonstration_env,
        feature_map=fmap,
        policy_right=pi_right,
        policy_left=pi_left,
        delta_d=delta_d,
        raw_feedback=tuple(raw),
        fset=fset,
        true_reward=r_star,
        true_gap=true_gap,
    )
    return experiment, problem

