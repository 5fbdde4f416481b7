"""Reward-space dissimilarities and Chebyshev geometry.

A premetric is a nonnegative dissimilarity with d(x, x) = 0; it need not be
symmetric or satisfy the triangle inequality.  The suite covers:

* ``l2`` / ``linf``: norms of the difference tensor;
* ``tr``: worst return gap over all state-action paths (paths are taken as
  arbitrary (s, a) sequences, not restricted to dynamics-consistent ones);
* ``pl``: planning regret, the suboptimality under the second reward of the
  worst optimal policy of the first;
* ``gr``: greedy regret under a state distribution (stationary one-step
  semantics required);
* ``co``: largest absolute return gap over all policies (a true metric up to
  unreachable state-action pairs).

Chebyshev center/radius/diameter of a finite set are computed by scanning an
explicit candidate list, with ties resolved to the first index.
"""

from dataclasses import dataclass

import numpy as np

from .mdp import ATOL, action_values, as_reward_array, backward_induction


@dataclass(frozen=True)
class Premetric:
    """A named dissimilarity, with the environment payload it needs."""

    kind: str
    env: object = None  # MdpSpec for "pl" and "co"
    state_dist: np.ndarray = None  # for "gr"
    tie_tol: float = ATOL

    def __post_init__(self):
        if self.kind not in ("l2", "linf", "tr", "pl", "gr", "co"):
            raise ValueError(f"unknown premetric kind {self.kind!r}")
        if self.kind in ("pl", "co") and self.env is None:
            raise ValueError(f"premetric {self.kind!r} needs an environment")
        if self.kind == "gr":
            if self.state_dist is None:
                raise ValueError("premetric 'gr' needs a state distribution")
            rho = np.asarray(self.state_dist, dtype=float)
            if rho.min() < 0 or abs(rho.sum() - 1.0) > ATOL:
                raise ValueError("state distribution must be a simplex vector")
            object.__setattr__(self, "state_dist", rho)

    def __call__(self, r, r_prime):
        return premetric_eval(self, r, r_prime)


def restricted_min_return(env, r_first, r_second, tie_tol=ATOL):
    """min over optimal policies of ``r_first`` of the ``r_second`` return.

    Among policies greedy w.r.t. the optimal action sets of ``r_first``
    (tolerance ``tie_tol``), dynamic programming picks the one minimizing the
    return under ``r_second``; behavior off the optimal sets cannot lower it.
    """
    q = action_values(env, r_first)
    v = q.max(axis=2)
    allowed = q >= v[:, :, None] - tie_tol
    r2 = as_reward_array(r_second, env.shape)
    H, S, _ = env.shape
    w_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        w = r2[h] + env.transitions[h] @ w_next
        w_next = np.where(allowed[h], w, np.inf).min(axis=1)
    return float(w_next[env.start_state])


def _stationary_slice(r):
    values = np.asarray(r, dtype=float)
    if not np.all(np.abs(values - values[0]) <= 1e-12):
        raise ValueError("greedy regret needs a step-independent reward")
    return values[0]


def premetric_eval(pm, r, r_prime):
    """Evaluate the dissimilarity d(r, r')."""
    a = as_reward_array(r)
    b = as_reward_array(r_prime)
    if a.shape != b.shape:
        raise ValueError(f"reward shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    if pm.kind == "l2":
        return float(np.linalg.norm(diff))
    if pm.kind == "linf":
        return float(np.abs(diff).max())
    if pm.kind == "tr":
        # over unconstrained paths the max return gap separates per step
        fwd = diff.max(axis=(1, 2)).sum()
        bwd = (-diff).max(axis=(1, 2)).sum()
        return float(max(fwd, bwd))
    if pm.kind == "pl":
        j_star = backward_induction(pm.env, b)[0]
        return j_star - restricted_min_return(pm.env, a, b, tie_tol=pm.tie_tol)
    if pm.kind == "co":
        forward = backward_induction(pm.env, diff)[0]
        backward = backward_induction(pm.env, -diff)[0]
        return float(max(forward, backward))
    # greedy regret: lowest-index greedy action of r evaluated under r'
    ra = _stationary_slice(a)
    rb = _stationary_slice(b)
    greedy = ra.argmax(axis=1)
    regret = rb.max(axis=1) - rb[np.arange(len(rb)), greedy]
    return float(pm.state_dist @ regret)


@dataclass(frozen=True)
class ChebyshevResult:
    center: np.ndarray
    radius: float
    diameter: float
    worst_case: np.ndarray  # max distance to the set, per candidate


def chebyshev_quantities(points, pm, candidates):
    """Center, radius and diameter of a finite set under a premetric.

    ``candidates`` is the explicit list scanned for the center (grid points,
    typically); the center is the first candidate minimizing the worst-case
    distance ``max_y d(candidate, y)`` to the set.  The diameter is the
    largest pairwise distance within the set (ordered pairs, since the
    premetric may be asymmetric).
    """
    points = list(points)
    if not points:
        raise ValueError("the point set is empty")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("the candidate list is empty")
    worst = np.empty(len(candidates))
    for i, cand in enumerate(candidates):
        worst[i] = max(premetric_eval(pm, cand, y) for y in points)
    best = int(np.argmin(worst))  # argmin takes the first minimizing index
    diameter = max(
        premetric_eval(pm, x, y) for x in points for y in points
    )
    return ChebyshevResult(
        center=np.asarray(as_reward_array(candidates[best])),
        radius=float(worst[best]),
        diameter=float(diameter),
        worst_case=worst,
    )


def worst_case_distance(pm, candidate, points):
    """max over the set of d(candidate, y): the candidate's worst-case loss."""
    return max(premetric_eval(pm, candidate, y) for y in points)
