"""Feedback as convex constraints on reward space.

Every supported feedback translates into a convex function ``g(r)`` with the
semantics ``r is consistent with the feedback iff g(r) <= 0``:

* demonstration ("the demonstrator is within t of optimal"):
  ``g(r) = max_pi J^pi(r; p_D) - <d_D, r> - t``
* trajectory comparison ("path 1 is not preferred to path 2, slack t"):
  ``g(r) = <d_w1 - d_w2, r> - t``
* policy comparison (same statement about two policies):
  ``g(r) = <d_1 - d_2, r> - t``
* fractional comparison ("J_1 >= alpha * J_2"):
  ``g(r) = alpha * <d_2, r> - <d_1, r>``
* bad-policy demonstration ("the demonstrator is within t of worst"):
  ``g(r) = <d, r> - min_pi J^pi(r; p) - t``

Slacks are accepted as arbitrary finite reals; a negative slack simply
tightens the halfspace.  Comparison constraints apply the convention
``<d_1 - d_2, r> <= t`` (first minus second on the left).
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .mdp import (
    MdpSpec,
    ShapeError,
    as_reward_array,
    backward_induction,
    backward_induction_batch,
    expected_return,
    policy_visitation,
)


class Variant(Enum):
    """Constraint kinds, in dual-vector layout order."""

    DEMONSTRATION = 0
    TRAJECTORY_COMPARISON = 1
    POLICY_COMPARISON = 2
    FRACTIONAL_COMPARISON = 3
    BAD_POLICY_DEMONSTRATION = 4


def _check_visit(d, name):
    d = np.asarray(d, dtype=float)
    if d.ndim != 3:
        raise ShapeError(f"{name} must have shape (H, S, A)")
    return d


@dataclass(frozen=True, eq=False)
class FeedbackConstraint:
    """One convex constraint ``g(r) <= 0`` on rewards.

    ``env`` is required for the demonstration variants (their ``g`` runs
    backward induction on it), ``d2`` for the comparison variants, and
    ``ratio`` only for fractional comparisons.
    """

    variant: Variant
    d1: np.ndarray = field(repr=False)
    d2: np.ndarray = field(default=None, repr=False)
    env: MdpSpec = None
    t: float = 0.0
    ratio: float = None

    def __post_init__(self):
        object.__setattr__(self, "d1", _check_visit(self.d1, "d1"))
        if self.variant in (Variant.DEMONSTRATION, Variant.BAD_POLICY_DEMONSTRATION):
            if self.env is None:
                raise ValueError(f"{self.variant.name} needs an environment handle")
            if self.d1.shape != self.env.shape:
                raise ShapeError(
                    f"visitation shape {self.d1.shape} != env shape {self.env.shape}"
                )
        elif self.variant is Variant.FRACTIONAL_COMPARISON:
            if self.ratio is None or not 0.0 < self.ratio <= 1.0:
                raise ValueError("fractional comparison needs ratio in (0, 1]")
            object.__setattr__(self, "d2", _check_visit(self.d2, "d2"))
        else:
            object.__setattr__(self, "d2", _check_visit(self.d2, "d2"))
        if self.d2 is not None and self.d2.shape != self.d1.shape:
            raise ShapeError("d1 and d2 shapes differ")
        if not math.isfinite(self.t):
            raise ValueError("slack t must be finite")

    @property
    def is_linear(self):
        return self.variant in (
            Variant.TRAJECTORY_COMPARISON,
            Variant.POLICY_COMPARISON,
            Variant.FRACTIONAL_COMPARISON,
        )

    def linear_direction(self):
        """The fixed gradient of a linear constraint."""
        if self.variant is Variant.FRACTIONAL_COMPARISON:
            return self.ratio * self.d2 - self.d1
        if self.is_linear:
            return self.d1 - self.d2
        raise ValueError(f"{self.variant.name} is not linear")


def demonstration(env, demo_visitation, t=0.0):
    return FeedbackConstraint(Variant.DEMONSTRATION, demo_visitation, env=env, t=t)


def demonstration_from_policy(env, policy, t=0.0):
    return demonstration(env, policy_visitation(env, policy), t=t)


def trajectory_comparison(d1, d2, t=0.0):
    return FeedbackConstraint(Variant.TRAJECTORY_COMPARISON, d1, d2=d2, t=t)


def policy_comparison(d1, d2, t=0.0):
    return FeedbackConstraint(Variant.POLICY_COMPARISON, d1, d2=d2, t=t)


def fractional_comparison(d1, d2, ratio):
    return FeedbackConstraint(Variant.FRACTIONAL_COMPARISON, d1, d2=d2, ratio=ratio)


def bad_policy_demonstration(env, demo_visitation, t=0.0):
    return FeedbackConstraint(
        Variant.BAD_POLICY_DEMONSTRATION, demo_visitation, env=env, t=t
    )


def constraint_value(c, r):
    """Evaluate g(r)."""
    if c.is_linear:
        return expected_return(c.linear_direction(), r) - c.t
    values = as_reward_array(r, c.env.shape)
    if c.variant is Variant.DEMONSTRATION:
        j_star, _, _ = backward_induction(c.env, values)
        return j_star - expected_return(c.d1, values) - c.t
    # bad-policy demonstration: min_pi J = -max_pi J(-r)
    j_min = -backward_induction(c.env, -values)[0]
    return expected_return(c.d1, values) - j_min - c.t


def constraint_subgradient(c, r):
    """A subgradient of g at r (for ties, the lowest-action-index element)."""
    if c.is_linear:
        return c.linear_direction()
    values = as_reward_array(r, c.env.shape)
    if c.variant is Variant.DEMONSTRATION:
        _, opt_policy, _ = backward_induction(c.env, values)
        return policy_visitation(c.env, opt_policy) - c.d1
    _, min_policy, _ = backward_induction(c.env, -values)
    return c.d1 - policy_visitation(c.env, min_policy)


_GROUP_RANK = {v: v.value for v in Variant}


@dataclass(frozen=True, eq=False)
class FeasibleSetSpec:
    """An ordered constraint list; the order fixes the dual-vector layout.

    Constraints are stably sorted into variant groups (demonstrations, then
    trajectory comparisons, then policy comparisons, then extensions) so that
    serialized problems and solver runs agree on multiplier positions.
    """

    constraints: tuple

    def __post_init__(self):
        ordered = tuple(
            sorted(self.constraints, key=lambda c: _GROUP_RANK[c.variant])
        )
        object.__setattr__(self, "constraints", ordered)

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def counts(self):
        """Number of constraints per variant, in layout order."""
        out = {v: 0 for v in Variant}
        for c in self.constraints:
            out[c.variant] += 1
        return out

    def with_extra(self, extra):
        return FeasibleSetSpec(self.constraints + (extra,))

    def values(self, r):
        return np.asarray([constraint_value(c, r) for c in self.constraints])

    def subgradients(self, r):
        return [constraint_subgradient(c, r) for c in self.constraints]


def feasibility(fset, r, tol=0.0):
    """Whether r satisfies every constraint up to ``tol``.

    Returns the verdict together with the per-constraint values, in layout
    order, so callers can report which constraint failed.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    values = fset.values(r)
    ok = bool(values.size == 0 or values.max() <= tol)
    return ok, values


def slater_margin(fset, r_bar):
    """The margin ``-max_i g_i(r_bar)``; positive certifies strict feasibility.

    With no constraints the feasible set is the whole reward box and the
    margin is reported as +inf.
    """
    if len(fset) == 0:
        return math.inf
    return float(-fset.values(r_bar).max())


def batch_constraint_values(fset, rewards):
    """g_i over a batch of reward tensors; shape (B, H, S, A) -> (B, m).

    Used by the discretization oracle, where per-point Python dispatch would
    dominate the runtime.  Linear constraints collapse to one matrix product;
    demonstration variants run batched backward induction on their
    environment.
    """
    rewards = np.asarray(rewards, dtype=float)
    B = rewards.shape[0]
    out = np.empty((B, len(fset)))
    flat = rewards.reshape(B, -1)
    for i, c in enumerate(fset):
        if c.is_linear:
            out[:, i] = flat @ c.linear_direction().ravel() - c.t
        elif c.variant is Variant.DEMONSTRATION:
            j_star = backward_induction_batch(c.env, rewards)
            out[:, i] = j_star - flat @ c.d1.ravel() - c.t
        else:
            j_min = -backward_induction_batch(c.env, -rewards)
            out[:, i] = flat @ c.d1.ravel() - j_min - c.t
    return out
