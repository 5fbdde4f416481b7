import numpy as np
import pytest

import robrel as rr
from robrel import feedback as fb
from robrel.oracle import (
    EmptyFeasibleGridError,
    RewardGrid,
    grid_objective_and_feasibility,
    sample_hull,
)

from conftest import random_mdp, random_policy


def feature_bandit(num_features):
    index = np.arange(num_features).reshape(1, 1, num_features)
    return rr.FeatureMap(index, num_features)


def unit_dir(num_features, j):
    d = np.zeros((1, 1, num_features))
    d[0, 0, j] = 1.0
    return d


class TestRewardGrid:
    def test_contains_endpoints(self):
        grid = RewardGrid(0.3, 2)
        axis = grid.axis()
        assert axis[0] == 0.0 and axis[-1] == 1.0
        assert grid.points_per_axis == 4

    def test_point_count(self):
        grid = RewardGrid(0.02, 3)
        assert grid.num_points == 51**3
        assert len(grid.points()) == 51**3

    def test_cap_enforced(self):
        grid = RewardGrid(0.01, 8)
        with pytest.raises(ValueError, match="cap"):
            grid.points()

    def test_chunks_preserve_order(self):
        grid = RewardGrid(0.02, 2)
        pts = grid.points()
        rebuilt = np.concatenate([block for _, block in grid.chunks()])
        assert np.array_equal(pts, rebuilt)


class TestGridExtrema:
    def test_box_extremum_single_positive_entry(self):
        fmap = feature_bandit(2)
        delta = unit_dir(2, 0)
        lo, hi, arg_lo, arg_hi = rr.grid_extrema(
            fb.FeasibleSetSpec(()), delta, RewardGrid(0.1, 2), feature_map=fmap
        )
        assert lo == 0.0 and hi == 1.0
        assert arg_hi.theta[0] == 1.0

    def test_halfspace_geometry(self):
        # constrain w0 + w1 <= 1; objective w0 peaks at (1, 0)
        fmap = feature_bandit(2)
        delta = unit_dir(2, 0)
        direction = unit_dir(2, 0) + unit_dir(2, 1)
        c = fb.policy_comparison(direction, np.zeros((1, 1, 2)), t=1.0)
        lo, hi, _, arg_hi = rr.grid_extrema(
            fb.FeasibleSetSpec((c,)), delta, RewardGrid(0.1, 2), feature_map=fmap
        )
        assert hi == pytest.approx(1.0)
        assert arg_hi.theta.tolist() == [1.0, 0.0]

    def test_cross_validates_pdsm(self, rng):
        fmap = feature_bandit(3)
        grid = RewardGrid(0.02, 3)
        for trial in range(5):
            delta = sum(
                float(rng.random() * 2 - 1) * unit_dir(3, j) for j in range(3)
            )
            cs = tuple(
                fb.policy_comparison(
                    unit_dir(3, int(rng.integers(3))),
                    unit_dir(3, int(rng.integers(3))),
                    t=float(rng.random() * 0.6 - 0.1),
                )
                for _ in range(2)
            )
            fset = fb.FeasibleSetSpec(cs)
            try:
                lo, hi, _, _ = rr.grid_extrema(fset, delta, grid, feature_map=fmap)
            except EmptyFeasibleGridError:
                continue
            prob = rr.RobRelProblem(
                delta, fset, rr.Hyperparams(4000, 0.05, 10.0), feature_map=fmap
            )
            rep = rr.rob_rel(prob, record_trace=False)
            assert abs(rep.lower - lo) <= 0.05
            assert abs(rep.upper - hi) <= 0.05

    def test_sandwich_exact_by_construction(self, rng):
        fmap = feature_bandit(2)
        delta = unit_dir(2, 0) - 0.5 * unit_dir(2, 1)
        c = fb.policy_comparison(unit_dir(2, 0), unit_dir(2, 1), t=0.25)
        fset = fb.FeasibleSetSpec((c,))
        grid = RewardGrid(0.05, 2)
        lo, hi, _, _ = rr.grid_extrema(fset, delta, grid, feature_map=fmap)
        objectives, feasible = grid_objective_and_feasibility(
            fset, delta, grid, feature_map=fmap
        )
        assert np.all(objectives[feasible] >= lo)
        assert np.all(objectives[feasible] <= hi)

    def test_empty_feasible_grid_raises(self):
        fmap = feature_bandit(2)
        delta = unit_dir(2, 0)
        impossible = fb.policy_comparison(unit_dir(2, 0), np.zeros((1, 1, 2)), t=-2.0)
        with pytest.raises(EmptyFeasibleGridError, match="refine the grid"):
            rr.grid_extrema(
                fb.FeasibleSetSpec((impossible,)), delta, RewardGrid(0.1, 2),
                feature_map=fmap,
            )

    def test_demonstration_constraints_in_batch(self, rng):
        # batch path must agree with scalar constraint evaluation
        mdp = random_mdp(rng, num_states=2, num_actions=2, horizon=2)
        c = fb.demonstration_from_policy(mdp, random_policy(rng, mdp), t=0.4)
        fset = fb.FeasibleSetSpec((c,))
        points = rng.random((64,) + mdp.shape)
        from robrel.feedback import batch_constraint_values

        batch = batch_constraint_values(fset, points)
        for i in range(0, 64, 7):
            assert batch[i, 0] == pytest.approx(fb.constraint_value(c, points[i]))

    def test_tabular_mode_small(self, rng):
        # tiny tabular problem: 1 state, 2 actions, H=1 -> dim 2
        delta = unit_dir(2, 0) - unit_dir(2, 1)
        lo, hi, _, _ = rr.grid_extrema(
            fb.FeasibleSetSpec(()), delta, RewardGrid(0.5, 2)
        )
        assert lo == -1.0 and hi == 1.0


class TestSampleHull:
    def test_contains_vertices(self):
        verts = np.array([[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0]])
        pts = sample_hull(verts, resolution=0.25)
        for v in verts:
            assert any(np.allclose(p, v) for p in pts)

    def test_points_inside_hull(self):
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        pts = sample_hull(verts, resolution=0.2)
        assert np.all(pts.sum(axis=1) <= 1.0 + 1e-12)
        assert np.all(pts >= -1e-12)
