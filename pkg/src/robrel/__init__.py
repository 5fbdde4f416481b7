"""Robust reward learning from heterogeneous feedback.

The package predicts the preference gap between two policies when the reward
is only known to lie in the set consistent with observed feedback
(demonstrations, trajectory comparisons, policy comparisons and their
extensions).  It returns the minimax-optimal scalar prediction together with
its worst-case error, and ships a brute-force discretization oracle to
validate the solver at desk scale.
"""

from .mdp import (
    ATOL,
    FeatureMap,
    MdpSpec,
    RewardPoint,
    ShapeError,
    Trajectory,
    backward_induction,
    deterministic_policy,
    expected_return,
    make_rng,
    policy_visitation,
    sample_trajectories,
    trajectory_return,
    trajectory_visitation,
)
from .feedback import (
    FeasibleSetSpec,
    FeedbackConstraint,
    Variant,
    bad_policy_demonstration,
    constraint_subgradient,
    constraint_value,
    demonstration,
    demonstration_from_policy,
    feasibility,
    fractional_comparison,
    policy_comparison,
    slater_margin,
    trajectory_comparison,
)
from .estimation import (
    ForwardModel,
    RawFeedback,
    TrajectoryDataset,
    estimate_transitions,
    estimate_visitation,
    estimated_constraint_set,
)
from .solver import (
    Hyperparams,
    RobRelProblem,
    SolveReport,
    combine_extrema,
    default_hyperparams,
    information_gain,
    lagrangian,
    lagrangian_subgradients,
    pdsm_extremum,
    project_dual,
    project_reward,
    rob_rel,
    subgradient_norm_bounds,
    worst_case_loss,
)
from .oracle import (
    EmptyFeasibleGridError,
    RewardGrid,
    grid_extrema,
    grid_slater_point,
    sample_hull,
)
from .premetrics import Premetric, chebyshev_quantities, premetric_eval

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
