"""Brute-force validation oracle over a discretized reward box.

The oracle enumerates grid points of the unit box (in feature space when a
feature map is present), keeps the ones satisfying every constraint, and
reads the objective extrema off them.  Reductions run in deterministic index
order so arg-extrema are reproducible.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .feedback import batch_constraint_values
from .mdp import RewardPoint

DEFAULT_POINT_CAP = 10**7
_CHUNK = 16384


class EmptyFeasibleGridError(RuntimeError):
    """No grid point satisfied the constraints."""


@dataclass(frozen=True)
class RewardGrid:
    """A uniform grid over [0, 1]^dim containing 0 and 1 on each axis."""

    resolution: float
    dim: int

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def points_per_axis(self):
        return int(np.floor(1.0 / self.resolution)) + 1

    @property
    def num_points(self):
        return self.points_per_axis**self.dim

    def axis(self):
        return np.linspace(0.0, 1.0, self.points_per_axis)

    def points(self, cap=DEFAULT_POINT_CAP):
        """All grid points as an array of shape (num_points, dim)."""
        if self.num_points > cap:
            raise ValueError(
                f"grid would hold {self.num_points} points, above the cap {cap}; "
                "use a coarser resolution or a feature map"
            )
        axes = [self.axis()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def chunks(self, cap=DEFAULT_POINT_CAP):
        """The same points in fixed-size blocks, preserving index order."""
        pts = self.points(cap)
        for start in range(0, len(pts), _CHUNK):
            yield start, pts[start : start + _CHUNK]


def _expand_batch(flat_points, shape, feature_map):
    if feature_map is None:
        return flat_points.reshape((-1,) + shape)
    padded = np.concatenate([flat_points, np.zeros((len(flat_points), 1))], axis=1)
    return padded[:, feature_map.index]


def grid_objective_and_feasibility(fset, delta_d, grid, feature_map=None, tol=0.0,
                                   cap=DEFAULT_POINT_CAP):
    """Objective values and feasibility flags for every grid point."""
    delta_d = np.asarray(delta_d, dtype=float)
    objectives = []
    feasible = []
    for _, block in grid.chunks(cap):
        rewards = _expand_batch(block, delta_d.shape, feature_map)
        obj = rewards.reshape(len(block), -1) @ delta_d.ravel()
        if len(fset):
            values = batch_constraint_values(fset, rewards)
            ok = values.max(axis=1) <= tol
        else:
            ok = np.ones(len(block), dtype=bool)
        objectives.append(obj)
        feasible.append(ok)
    return np.concatenate(objectives), np.concatenate(feasible)


def grid_extrema(fset, delta_d, grid, feature_map=None, tol=0.0,
                 cap=DEFAULT_POINT_CAP):
    """Exact objective extrema over the feasible grid points.

    Returns ``(minimum, maximum, argmin, argmax)`` with the arg-extrema as
    RewardPoint instances (first grid index wins ties).
    """
    objectives, feasible = grid_objective_and_feasibility(
        fset, delta_d, grid, feature_map=feature_map, tol=tol, cap=cap
    )
    if not feasible.any():
        raise EmptyFeasibleGridError(
            "no grid point satisfies all constraints; refine the grid or check "
            "that the constraint set has a strictly feasible reward"
        )
    idx = np.flatnonzero(feasible)
    vals = objectives[idx]
    arg_lo = idx[int(np.argmin(vals))]
    arg_hi = idx[int(np.argmax(vals))]
    pts = grid.points(cap)

    def as_reward(flat):
        if feature_map is not None:
            return RewardPoint.from_theta(feature_map, flat)
        return RewardPoint(flat.reshape(np.asarray(delta_d).shape))

    return (
        float(vals.min()),
        float(vals.max()),
        as_reward(pts[arg_lo]),
        as_reward(pts[arg_hi]),
    )


def grid_slater_point(fset, grid, shape, feature_map=None, cap=DEFAULT_POINT_CAP):
    """The grid point with the largest feasibility margin, and that margin.

    Useful both as a strict-feasibility certificate and as a fallback margin
    estimate when none is supplied.  With no constraints the margin is +inf
    at the first grid point.
    """
    best_margin = -np.inf
    best_point = None
    if len(fset) == 0:
        first = grid.points(cap)[0]
        rewards = _expand_batch(first[None, :], shape, feature_map)
        return RewardPoint(rewards[0]), np.inf
    for _, block in grid.chunks(cap):
        rewards = _expand_batch(block, shape, feature_map)
        values = batch_constraint_values(fset, rewards)
        margins = -values.max(axis=1)
        j = int(np.argmax(margins))
        if margins[j] > best_margin:
            best_margin = float(margins[j])
            best_point = block[j]
    if feature_map is not None:
        point = RewardPoint.from_theta(feature_map, best_point)
    else:
        point = RewardPoint(best_point.reshape(shape))
    return point, best_margin


def sample_hull(vertices, resolution):
    """Grid-sample the convex hull of a point list via barycentric weights.

    Weights are taken on the simplex grid with the given resolution, so the
    vertices themselves are always included.
    """
    vertices = np.asarray(vertices, dtype=float)
    k = len(vertices)
    steps = int(round(1.0 / resolution))
    combos = []
    for weights in product(range(steps + 1), repeat=k - 1):
        rest = steps - sum(weights)
        if rest >= 0:
            combos.append(np.asarray(weights + (rest,), dtype=float) / steps)
    weights = np.asarray(combos)
    return weights @ vertices
