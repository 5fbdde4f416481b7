import numpy as np
import pytest

import robrel as rr
from robrel import feedback as fb
from robrel.estimation import (
    ForwardModel,
    RawFeedback,
    TrajectoryDataset,
    estimate_transitions,
    estimate_visitation,
    estimated_constraint_set,
    reachable_state_mask,
    transitions_from_counts,
)

from conftest import random_mdp, random_policy


def visitation_error(d_hat, d):
    """sup over the reward box of |<d_hat - d, r>|, split by sign."""
    diff = d_hat - d
    return max(diff[diff > 0].sum(initial=0.0), -diff[diff < 0].sum(initial=0.0))


def transition_error(p_hat_mdp, mdp):
    """Max-norm error over rows that can actually be visited."""
    mask = reachable_state_mask(mdp)
    err = np.abs(p_hat_mdp.transitions - mdp.transitions).max(axis=(2, 3))
    return err[mask].max()


class TestEstimateVisitation:
    def test_degenerate_dataset_is_indicator(self, rng):
        omega = rr.Trajectory([0, 1, 0], [1, 0])
        data = TrajectoryDataset([omega] * 7)
        d = estimate_visitation(data, 2, 2)
        assert np.array_equal(d, rr.trajectory_visitation(omega, 2, 2))

    def test_even_split(self):
        w1 = rr.Trajectory([0, 0], [0])
        w2 = rr.Trajectory([0, 0], [1])
        d = estimate_visitation(TrajectoryDataset([w1, w2]), 1, 2)
        assert d[0].tolist() == [[0.5, 0.5]]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            estimate_visitation(TrajectoryDataset([]), 1, 1)

    def test_mixed_horizons_rejected(self):
        with pytest.raises(ValueError, match="horizon"):
            TrajectoryDataset([rr.Trajectory([0, 0], [0]), rr.Trajectory([0, 0, 0], [0, 0])])

    def test_slices_sum_exactly(self, rng):
        mdp = random_mdp(rng, num_states=4, num_actions=3, horizon=4)
        pi = random_policy(rng, mdp)
        data = TrajectoryDataset(rr.sample_trajectories(mdp, pi, 321, seed=0))
        d = estimate_visitation(data, 4, 3)
        assert np.allclose(d.sum(axis=(1, 2)), 1.0, atol=1e-12)

    def test_error_shrinks_when_n_quadruples(self, rng):
        mdp = random_mdp(rng, num_states=3, num_actions=2, horizon=3)
        pi = random_policy(rng, mdp)
        d = rr.policy_visitation(mdp, pi)
        medians = []
        for n in (100, 400):
            errs = []
            for seed in range(9):
                data = TrajectoryDataset(rr.sample_trajectories(mdp, pi, n, (n, seed)))
                errs.append(visitation_error(estimate_visitation(data, 3, 2), d))
            medians.append(np.median(errs))
        assert medians[1] < medians[0]


class TestEstimateTransitions:
    def test_zero_budget_uniform(self, rng):
        mdp = random_mdp(rng)
        model = ForwardModel(mdp, seed=0)
        p_hat = estimate_transitions(model=model, budget=0)
        assert np.allclose(p_hat.transitions, 1.0 / mdp.num_states)
        assert model.queries == 0

    def test_deterministic_rows_recovered_exactly(self):
        p = np.zeros((2, 2, 2, 2))
        p[:, 0, 0, 1] = 1.0
        p[:, 0, 1, 0] = 1.0
        p[:, 1, 0, 0] = 1.0
        p[:, 1, 1, 1] = 1.0
        mdp = rr.MdpSpec(2, 2, 2, 0, p)
        model = ForwardModel(mdp, seed=4)
        p_hat = estimate_transitions(model=model, budget=60)
        visited = p_hat.transitions.max(axis=-1) == 1.0  # visited rows are 0/1
        uniform = np.all(p_hat.transitions == 0.5, axis=-1)
        assert np.all(visited | uniform)
        # every visited row must agree with the truth
        mask = visited[..., None] & (p_hat.transitions > 0)
        assert np.all(p[mask] == 1.0)

    def test_count_greedy_beats_fewer_episodes(self, rng):
        mdp = random_mdp(rng, num_states=3, num_actions=2, horizon=3)
        errs = {}
        for budget in (120, 1200):
            per_seed = []
            for seed in range(3):
                model = ForwardModel(mdp, seed=(budget, seed))
                p_hat = estimate_transitions(model=model, budget=budget)
                per_seed.append(transition_error(p_hat, mdp))
            errs[budget] = np.median(per_seed)
        assert errs[1200] < errs[120]

    def test_uniform_strategy_runs(self, rng):
        mdp = random_mdp(rng)
        model = ForwardModel(mdp, seed=1)
        p_hat = estimate_transitions(model=model, budget=50, strategy="uniform")
        assert model.queries == 50
        assert np.allclose(p_hat.transitions.sum(axis=-1), 1.0)

    def test_counts_path(self):
        counts = np.zeros((1, 2, 1, 2))
        counts[0, 0, 0] = [3, 1]
        p_hat = transitions_from_counts(counts, start_state=0)
        assert p_hat.transitions[0, 0, 0].tolist() == [0.75, 0.25]
        assert p_hat.transitions[0, 1, 0].tolist() == [0.5, 0.5]

    def test_deterministic_given_seed(self, rng):
        mdp = random_mdp(rng)
        runs = []
        for _ in range(2):
            model = ForwardModel(mdp, seed=77)
            runs.append(estimate_transitions(model=model, budget=40).transitions)
        assert np.array_equal(runs[0], runs[1])


class TestEstimatedConstraintSet:
    def make_raw(self, rng, mdp, mdp2):
        pi = random_policy(rng, mdp)
        w1, w2 = rr.sample_trajectories(mdp, pi, 2, seed=3)
        return [
            RawFeedback(fb.Variant.DEMONSTRATION, env=mdp2, policy1=random_policy(rng, mdp2), t=0.5),
            RawFeedback(fb.Variant.TRAJECTORY_COMPARISON, env=mdp, traj1=w1, traj2=w2, t=0.1),
            RawFeedback(
                fb.Variant.POLICY_COMPARISON,
                env=mdp,
                policy1=random_policy(rng, mdp),
                policy2=random_policy(rng, mdp),
                t=0.0,
            ),
        ]

    def test_exact_mode_matches_direct_construction(self, rng):
        mdp = random_mdp(rng)
        mdp2 = random_mdp(rng)
        raw = self.make_raw(rng, mdp, mdp2)
        fset = estimated_constraint_set(raw, mode="exact")
        direct_demo = fb.demonstration_from_policy(mdp2, raw[0].policy1, t=0.5)
        r = rng.random(mdp.shape)
        assert fb.constraint_value(fset.constraints[0], r) == pytest.approx(
            fb.constraint_value(direct_demo, r)
        )
        assert len(fset) == 3

    def test_trajectory_comparisons_copied_untouched(self, rng):
        mdp = random_mdp(rng)
        raw = self.make_raw(rng, mdp, random_mdp(rng))
        exact = estimated_constraint_set(raw, mode="exact")
        estimated = estimated_constraint_set(
            raw, mode="estimated", num_trajectories=50, model_budget=50, seed=0
        )
        i = [c.variant for c in exact].index(fb.Variant.TRAJECTORY_COMPARISON)
        assert np.array_equal(exact.constraints[i].d1, estimated.constraints[i].d1)
        assert np.array_equal(exact.constraints[i].d2, estimated.constraints[i].d2)

    def test_large_sample_limit(self, rng):
        mdp = random_mdp(rng, num_states=2, num_actions=2, horizon=2)
        mdp2 = random_mdp(rng, num_states=2, num_actions=2, horizon=2)
        raw = self.make_raw(rng, mdp, mdp2)
        exact = estimated_constraint_set(raw, mode="exact")
        estimated = estimated_constraint_set(
            raw, mode="estimated", num_trajectories=100_000, model_budget=20_000, seed=1
        )
        for _ in range(10):
            r = rng.random(mdp.shape)
            exact_vals = exact.values(r)
            est_vals = estimated.values(r)
            assert np.abs(exact_vals - est_vals).max() <= 0.05

    def test_missing_budget_names_feedback(self, rng):
        mdp = random_mdp(rng)
        raw = self.make_raw(rng, mdp, random_mdp(rng))
        with pytest.raises(ValueError, match="feedback 0 \\(DEMONSTRATION\\)"):
            estimated_constraint_set(raw, mode="estimated", num_trajectories=None)

    def test_deterministic_given_seed(self, rng):
        mdp = random_mdp(rng)
        raw = self.make_raw(rng, mdp, random_mdp(rng))
        a = estimated_constraint_set(raw, mode="estimated", num_trajectories=30,
                                     model_budget=25, seed=5)
        b = estimated_constraint_set(raw, mode="estimated", num_trajectories=30,
                                     model_budget=25, seed=5)
        r = rng.random(mdp.shape)
        assert np.array_equal(a.values(r), b.values(r))
