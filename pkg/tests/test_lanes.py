import numpy as np
import pytest

import robrel as rr
from robrel import feedback as fb
from robrel import lanes
from robrel.problem_io import build_problem, lanes_spec_dict, parse_spec


class TestRoadDynamics:
    def test_kernel_rows_are_distributions(self):
        assert np.allclose(lanes.LANE_KERNEL.sum(axis=-1), 1.0)

    def test_published_kernel_values(self):
        L, C, R = 0, 1, 2
        aL, aC, aR = 0, 1, 2
        assert lanes.LANE_KERNEL[C, aL].tolist() == [0.6, 0.4, 0.0]
        assert lanes.LANE_KERNEL[C, aC].tolist() == [0.3, 0.4, 0.3]
        assert lanes.LANE_KERNEL[C, aR].tolist() == [0.0, 0.3, 0.7]
        assert lanes.LANE_KERNEL[L, aL].tolist() == [1.0, 0.0, 0.0]
        assert lanes.LANE_KERNEL[L, aC].tolist() == [0.55, 0.45, 0.0]
        assert lanes.LANE_KERNEL[L, aR].tolist() == [0.3, 0.7, 0.0]
        assert lanes.LANE_KERNEL[R, aL].tolist() == [0.0, 0.6, 0.4]
        assert lanes.LANE_KERNEL[R, aC].tolist() == [0.0, 0.45, 0.55]
        assert lanes.LANE_KERNEL[R, aR].tolist() == [0.0, 0.0, 1.0]

    def test_one_step_visitation_from_center(self):
        env = lanes.build_road(lanes.TARGET_LAYOUT, start_lane=1)
        pi_left = lanes.constant_policy(env, lanes.ACTION_LEFT)
        d = rr.policy_visitation(env, pi_left)
        # second step: left lane w.p. 0.6 (state holds the square there),
        # center lane w.p. 0.4 (empty)
        s_left = lanes.state_of(0, lanes.ITEMS.index("S"))
        s_center = lanes.state_of(1, lanes.ITEMS.index("N"))
        assert d[1, s_left, lanes.ACTION_LEFT] == pytest.approx(0.6)
        assert d[1, s_center, lanes.ACTION_LEFT] == pytest.approx(0.4)

    def test_states_follow_layout(self):
        env = lanes.build_road(lanes.TARGET_LAYOUT, start_lane=1)
        # every reachable state at step h carries the layout's item
        table = lanes.parse_layout(lanes.TARGET_LAYOUT)
        pi = np.full(env.shape, 1.0 / 3)
        d = rr.policy_visitation(env, pi)
        for h in range(env.horizon):
            for s in range(env.num_states):
                if d[h, s].sum() > 0:
                    lane, item = divmod(s, lanes.NUM_ITEMS)
                    assert item == table[h, lane]


class TestBuildLanes:
    def test_reference_gap(self, lanes_experiment):
        exp, _ = lanes_experiment
        assert exp.true_gap == pytest.approx(0.3898, abs=1e-12)

    def test_gap_monte_carlo_oracle(self, lanes_experiment):
        exp, _ = lanes_experiment
        n = 40_000
        returns = []
        for pi in (exp.policy_right, exp.policy_left):
            trajs = rr.sample_trajectories(exp.target, pi, n, seed=17)
            returns.append(
                np.mean([rr.trajectory_return(w, exp.true_reward.values) for w in trajs])
            )
        assert returns[0] - returns[1] == pytest.approx(exp.true_gap, abs=0.03)

    def test_zero_reward_zero_gap(self):
        exp, _ = lanes.build_lanes(reward=np.zeros(3))
        assert exp.true_gap == 0.0

    def test_empty_road_zero_gap(self):
        empty = ("NNN",) * 5
        exp, _ = lanes.build_lanes(
            target_layout=empty, comparison_layout=empty, demonstration_layout=empty
        )
        assert exp.true_gap == 0.0

    def test_reference_reward_feasible_with_margin(self, lanes_experiment):
        exp, _ = lanes_experiment
        ok, values = rr.feasibility(exp.fset, exp.true_reward)
        assert ok
        assert values.max() <= -0.05

    def test_feasible_set_has_interior(self, lanes_experiment):
        exp, _ = lanes_experiment
        _, margin = rr.grid_slater_point(
            exp.fset, rr.RewardGrid(0.1, 3), exp.target.shape, feature_map=exp.feature_map
        )
        assert margin > 0.1

    def test_layout_validation(self):
        with pytest.raises(ValueError, match="rows"):
            lanes.build_road(("NNN",), start_lane=0)
        with pytest.raises(ValueError, match="unknown item"):
            lanes.build_road(("NXN",) * 5, start_lane=0)

    def test_six_feedback_in_layout_order(self, lanes_experiment):
        exp, _ = lanes_experiment
        variants = [c.variant for c in exp.fset]
        assert variants == [
            fb.Variant.DEMONSTRATION,
            fb.Variant.TRAJECTORY_COMPARISON,
            fb.Variant.TRAJECTORY_COMPARISON,
            fb.Variant.TRAJECTORY_COMPARISON,
            fb.Variant.POLICY_COMPARISON,
            fb.Variant.POLICY_COMPARISON,
        ]
        slacks = [c.t for c in exp.fset]
        assert slacks == [1.0, 0.3, 1.0, -0.5, 0.0, 0.5]


class TestLanesSolveAndOracle:
    def test_reference_run_brackets_oracle_gap(self, lanes_experiment):
        exp, problem = lanes_experiment
        grid = rr.RewardGrid(0.02, 3)
        lo, hi, _, _ = rr.grid_extrema(
            exp.fset, problem.delta_d, grid, feature_map=exp.feature_map
        )
        assert lo < 0 < hi
        rep = rr.rob_rel(problem, record_trace=False)
        assert rep.lower < 0 < rep.upper
        oracle_gap = hi - lo
        solver_gap = rep.upper - rep.lower
        assert abs(solver_gap - oracle_gap) <= 0.15 * oracle_gap

    def test_spec_dict_reproduces_builder(self, lanes_experiment):
        exp, problem = lanes_experiment
        spec = parse_spec(lanes_spec_dict(exp), base_dir=".")
        rebuilt, extras, _ = build_problem(spec, warn=None)
        assert extras == ()
        assert np.allclose(rebuilt.delta_d, problem.delta_d, atol=1e-12)
        assert len(rebuilt.fset) == len(problem.fset)
        rng = rr.make_rng(3)
        for _ in range(5):
            r = rr.RewardPoint.from_theta(exp.feature_map, rng.random(3))
            assert np.allclose(rebuilt.fset.values(r), problem.fset.values(r), atol=1e-12)
