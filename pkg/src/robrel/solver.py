"""Minimax solver for the policy-preference gap over a feasible reward set.

Given the objective direction ``delta_d = d_pi1 - d_pi2`` and a list of
convex feedback constraints, the solver computes the smallest and largest
achievable values of ``<delta_d, r>`` over the feasible set with a
primal-dual subgradient method (PDSM), then combines them into the minimax
prediction ``x = (M + m) / 2`` and its worst-case error ``I = (M - m) / 2``.

Both extremum problems share the Lagrangian

    L(r, lam) = <delta_d, r> + sum_i lam_i * g_i(r),

minimized/maximized over the reward box with the dual constrained to the
nonnegative (minimum) or nonpositive (maximum) orthant intersected with an
L2 ball of radius ``s``.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from .feedback import FeasibleSetSpec
from .mdp import FeatureMap, RewardPoint, ShapeError


@dataclass(frozen=True)
class Hyperparams:
    """PDSM settings: iteration count, step size, dual radius."""

    iterations: int
    step_size: float
    dual_radius: float

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iteration count must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step size must be > 0")
        if self.dual_radius < 0:
            raise ValueError("dual radius must be >= 0")


@dataclass(frozen=True)
class DerivedHyperparams:
    """Dual radius and step size from the accuracy/margin formulas.

    ``subgradient_bound`` is the quantity ``U = 2 sqrt(H) (1 + s sqrt(m))``
    bounding every primal subgradient norm; the step size equals
    ``epsilon / (4 U^2)``.
    """

    dual_radius: float
    step_size: float
    subgradient_bound: float


def default_hyperparams(horizon, num_states, num_actions, xi, epsilon, num_constraints):
    """Principled dual radius and step size for a target accuracy.

    ``xi`` is a strict-feasibility margin (some reward satisfies every
    constraint with slack at least ``xi``); ``epsilon`` is the accuracy
    target in (0, 2H].
    """
    if xi <= 0:
        raise ValueError("the strict-feasibility margin xi must be > 0")
    if not 0 < epsilon <= 2 * horizon:
        raise ValueError("epsilon must lie in (0, 2H]")
    ratio = 4.0 * horizon / xi
    s = ratio + math.sqrt(ratio**2 + num_states * num_actions * horizon / 4.0)
    u = 2.0 * math.sqrt(horizon) * (1.0 + s * math.sqrt(num_constraints))
    alpha = epsilon / (16.0 * horizon * (1.0 + s * math.sqrt(num_constraints)) ** 2)
    return DerivedHyperparams(dual_radius=s, step_size=alpha, subgradient_bound=u)


def subgradient_norm_bounds(horizon, dual_radius, num_constraints):
    """(primal, dual) subgradient norm bounds holding at every iterate."""
    primal = 2.0 * math.sqrt(horizon) * (1.0 + dual_radius * math.sqrt(num_constraints))
    dual = 2.0 * horizon * math.sqrt(num_constraints)
    return primal, dual


@dataclass(frozen=True, eq=False)
class RobRelProblem:
    """Objective direction, constraint set and solver settings.

    When ``feature_map`` is given, the PDSM iterates in weight space: the
    projection clamps the weights to ``[0, 1]^d`` and the primal subgradient
    is pulled back through the map.  This is the tabular method restricted to
    the feature subspace.
    """

    delta_d: np.ndarray = field(repr=False)
    fset: FeasibleSetSpec
    hyper: Hyperparams
    feature_map: Optional[FeatureMap] = None

    def __post_init__(self):
        delta = np.asarray(self.delta_d, dtype=float)
        if delta.ndim != 3:
            raise ShapeError("delta_d must have shape (H, S, A)")
        if not np.all(np.isfinite(delta)):
            raise ValueError("delta_d has non-finite entries")
        if self.feature_map is not None and self.feature_map.shape != delta.shape:
            raise ShapeError("feature map shape does not match delta_d")
        object.__setattr__(self, "delta_d", delta)

    @property
    def horizon(self):
        return self.delta_d.shape[0]

    def with_hyper(self, hyper):
        return RobRelProblem(self.delta_d, self.fset, hyper, self.feature_map)

    def with_fset(self, fset):
        return RobRelProblem(self.delta_d, fset, self.hyper, self.feature_map)

    def objective(self, r):
        values = r.values if isinstance(r, RewardPoint) else np.asarray(r, float)
        return float(np.vdot(self.delta_d, values))


def lagrangian(problem, r, lam):
    """L(r, lam) = <delta_d, r> + sum_i lam_i g_i(r)."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(problem.fset),):
        raise ShapeError(f"dual vector length {lam.shape} != ({len(problem.fset)},)")
    return problem.objective(r) + float(lam @ problem.fset.values(r))


def lagrangian_subgradients(problem, r, lam):
    """Subgradients (d/dr L, d/dlam L); the dual part equals the g_i values."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(problem.fset),):
        raise ShapeError(f"dual vector length {lam.shape} != ({len(problem.fset)},)")
    grad_r = problem.delta_d.copy()
    for lam_i, sub in zip(lam, problem.fset.subgradients(r)):
        if lam_i != 0.0:
            grad_r += lam_i * sub
    grad_lam = problem.fset.values(r)
    return grad_r, grad_lam


def project_reward(x, feature_map=None):
    """Euclidean projection onto the unit reward box.

    Componentwise clamp to [0, 1]; with a feature map the clamp acts on the
    weights and the tensor is rebuilt from them.
    """
    if feature_map is not None:
        theta = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return RewardPoint.from_theta(feature_map, theta)
    return RewardPoint(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))


def project_dual(lam, radius, sign=+1):
    """Exact L2 projection onto the signed orthant cut with a norm ball.

    Clamping against the orthant first and rescaling radially second is the
    exact projection because the orthant is a cone and the ball is centered
    at the origin.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    lam = np.asarray(lam, dtype=float)
    clamped = np.maximum(lam, 0.0) if sign > 0 else np.minimum(lam, 0.0)
    norm = np.linalg.norm(clamped)
    if norm > radius:
        clamped = clamped * (radius / norm)
    return clamped


@dataclass
class IterationTrace:
    """Per-iteration series recorded by one extremum solve (K+1 rows)."""

    objective: np.ndarray
    max_violation: np.ndarray
    dual_norm: np.ndarray
    grad_r_norm: np.ndarray
    grad_lam_norm: np.ndarray
    primal: Optional[np.ndarray] = None  # feature-space iterates, if compact


@dataclass(frozen=True, eq=False)
class ExtremumResult:
    value: float
    reward: RewardPoint
    trace: Optional[IterationTrace]


def pdsm_extremum(problem, direction, record_trace=True):
    """One projected primal-dual subgradient run from r_0 = 0, lam_0 = 0.

    ``direction`` selects the extremum: "min" descends in the reward and
    ascends a nonnegative dual, "max" mirrors both.  The reported value is
    ``<delta_d, r_bar>`` at the averaged iterate
    ``r_bar = (1/K) * sum_{k=0..K} r_k`` (K+1 terms over K).
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    hyper = problem.hyper
    K, alpha, radius = hyper.iterations, hyper.step_size, hyper.dual_radius
    sign = +1 if direction == "min" else -1
    fmap = problem.feature_map
    m = len(problem.fset)

    if fmap is not None:
        primal = np.zeros(fmap.num_features)
    else:
        primal = np.zeros(problem.delta_d.shape)
    lam = np.zeros(m)
    primal_sum = np.zeros_like(primal)

    rows = K + 1
    trace = (
        IterationTrace(
            objective=np.empty(rows),
            max_violation=np.empty(rows),
            dual_norm=np.empty(rows),
            grad_r_norm=np.empty(rows),
            grad_lam_norm=np.empty(rows),
            primal=np.empty((rows, primal.size)) if primal.size <= 16 else None,
        )
        if record_trace
        else None
    )

    for k in range(rows):
        r_k = (
            RewardPoint.from_theta(fmap, primal)
            if fmap is not None
            else RewardPoint(primal)
        )
        grad_r, grad_lam = lagrangian_subgradients(problem, r_k, lam)
        if trace is not None:
            trace.objective[k] = problem.objective(r_k)
            trace.max_violation[k] = grad_lam.max() if m else 0.0
            trace.dual_norm[k] = np.linalg.norm(lam)
            trace.grad_r_norm[k] = np.linalg.norm(grad_r)
            trace.grad_lam_norm[k] = np.linalg.norm(grad_lam)
            if trace.primal is not None:
                trace.primal[k] = primal.ravel()
        primal_sum += primal

        step = fmap.contract(grad_r) if fmap is not None else grad_r
        primal = np.clip(primal - sign * alpha * step, 0.0, 1.0)
        lam = project_dual(lam + sign * alpha * grad_lam, radius, sign=sign)

    averaged = primal_sum / K
    r_bar = (
        RewardPoint.from_theta(fmap, averaged)
        if fmap is not None
        else RewardPoint(averaged)
    )
    return ExtremumResult(problem.objective(r_bar), r_bar, trace)


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of the two extremum solves and their combination."""

    lower: float
    upper: float
    prediction: float
    worst_case_error: float
    reward_at_lower: RewardPoint
    reward_at_upper: RewardPoint
    trace_lower: Optional[IterationTrace]
    trace_upper: Optional[IterationTrace]


def combine_extrema(lower, upper):
    """Midpoint prediction and half-gap error, one floating operation each."""
    return (upper + lower) / 2, (upper - lower) / 2


def rob_rel(problem, record_trace=True):
    """Run both extremum solves and combine them into a SolveReport."""
    lo = pdsm_extremum(problem, "min", record_trace=record_trace)
    hi = pdsm_extremum(problem, "max", record_trace=record_trace)
    prediction, error = combine_extrema(lo.value, hi.value)
    return SolveReport(
        lower=lo.value,
        upper=hi.value,
        prediction=prediction,
        worst_case_error=error,
        reward_at_lower=lo.reward,
        reward_at_upper=hi.reward,
        trace_lower=lo.trace,
        trace_upper=hi.trace,
    )


def worst_case_loss(x, lower, upper):
    """Largest |x - v| over v in [lower, upper]: max(x - lower, upper - x)."""
    if lower > upper:
        raise ValueError(f"lower {lower} exceeds upper {upper}")
    return max(x - lower, upper - x)


def information_gain(problem, extra, method="pdsm", grid=None, tol=0.0):
    """Reduction of the worst-case error from adding one constraint.

    ``method="pdsm"`` reruns the solver with and without ``extra``;
    ``method="oracle"`` evaluates both feasible sets exactly on a shared
    discretization grid (requires ``grid``).
    """
    enlarged = problem.with_fset(problem.fset.with_extra(extra))
    if method == "pdsm":
        base = rob_rel(problem, record_trace=False).worst_case_error
        more = rob_rel(enlarged, record_trace=False).worst_case_error
        return base - more
    if method != "oracle":
        raise ValueError(f"unknown information gain method {method!r}")
    from .oracle import grid_extrema

    if grid is None:
        raise ValueError("oracle method needs a grid")
    m0, big0, _, _ = grid_extrema(problem.fset, problem.delta_d, grid,
                                  feature_map=problem.feature_map, tol=tol)
    m1, big1, _, _ = grid_extrema(enlarged.fset, problem.delta_d, grid,
                                  feature_map=problem.feature_map, tol=tol)
    return (big0 - m0) / 2 - (big1 - m1) / 2
