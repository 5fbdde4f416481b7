"""Finite-horizon tabular MDP primitives.

Conventions used throughout the package:

* transition tensors have shape ``(H, S, A, S)``, indexed ``p[h, s, a, s']``;
* rewards and visitation distributions have shape ``(H, S, A)``;
* policies have shape ``(H, S, A)`` with ``pi[h, s]`` a distribution over
  actions;
* step indices run ``h = 0..H-1`` internally (the first decision is ``h=0``).

Rewards fed to the solver live in ``[0, 1]``, but every routine here accepts
arbitrary finite values because reward differences are needed elsewhere.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ATOL = 1e-9


class ShapeError(ValueError):
    """Raised when an array does not match the dimensions of an MDP."""


@dataclass(frozen=True, eq=False)
class MdpSpec:
    """A finite-horizon MDP without reward.

    Parameters
    ----------
    num_states, num_actions, horizon : int
        Sizes of the state space, action space and episode length.
    start_state : int
        Index of the deterministic initial state.
    transitions : ndarray, shape (H, S, A, S)
        ``transitions[h, s, a]`` is the distribution of the next state.
    """

    num_states: int
    num_actions: int
    horizon: int
    start_state: int
    transitions: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("num_states", "num_actions", "horizon", "start_state"):
            object.__setattr__(self, name, int(getattr(self, name)))
        S, A, H = self.num_states, self.num_actions, self.horizon
        if min(S, A, H) < 1:
            raise ValueError("state/action counts and horizon must be >= 1")
        if not 0 <= self.start_state < S:
            raise ValueError(f"start_state {self.start_state} out of range [0, {S})")
        p = np.asarray(self.transitions, dtype=float)
        if p.shape != (H, S, A, S):
            raise ShapeError(f"transitions shape {p.shape} != {(H, S, A, S)}")
        if np.any(p < 0):
            raise ValueError("transition tensor has negative entries")
        sums = p.sum(axis=-1)
        if np.max(np.abs(sums - 1.0)) > ATOL:
            bad = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
            h, s, a = (int(i) for i in bad)
            raise ValueError(
                f"transition row (h,s,a)=({h}, {s}, {a}) sums to {float(sums[bad])}"
            )
        object.__setattr__(self, "transitions", p)

    @classmethod
    def stationary(cls, num_states, num_actions, horizon, start_state, transitions):
        """Broadcast a single (S, A, S) transition kernel over all steps."""
        p = np.asarray(transitions, dtype=float)
        if p.shape != (num_states, num_actions, num_states):
            raise ShapeError(
                f"stationary kernel shape {p.shape} != "
                f"{(num_states, num_actions, num_states)}"
            )
        full = np.broadcast_to(p, (horizon,) + p.shape).copy()
        return cls(num_states, num_actions, horizon, start_state, full)

    @property
    def shape(self):
        """Shape of reward/visitation tensors for this MDP: (H, S, A)."""
        return (self.horizon, self.num_states, self.num_actions)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Linear indicator parameterization of rewards.

    ``index[h, s, a]`` names the feature whose weight is the reward of
    ``(s, a)`` at step ``h``; the sentinel ``-1`` pins the reward to zero.
    With weights ``theta`` in ``[0, 1]^d`` the induced reward is
    ``r[h, s, a] = theta[index[h, s, a]]``.
    """

    index: np.ndarray = field(repr=False)
    num_features: int

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=int)
        if self.num_features < 1:
            raise ValueError("num_features must be >= 1")
        if idx.ndim != 3:
            raise ShapeError("feature index must have shape (H, S, A)")
        if idx.min() < -1 or idx.max() >= self.num_features:
            raise ValueError("feature indices must lie in [-1, num_features)")
        object.__setattr__(self, "index", idx)

    @property
    def shape(self):
        return self.index.shape

    def expand(self, theta):
        """Reward tensor Phi @ theta for weights ``theta`` of length d."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_features,):
            raise ShapeError(f"theta shape {theta.shape} != ({self.num_features},)")
        padded = np.concatenate([theta, [0.0]])
        return padded[self.index]

    def contract(self, grad):
        """Pull a reward-space tensor back to feature space (Phi^T @ grad)."""
        grad = np.asarray(grad, dtype=float)
        if grad.shape != self.index.shape:
            raise ShapeError(f"gradient shape {grad.shape} != {self.index.shape}")
        out = np.zeros(self.num_features + 1)
        np.add.at(out, self.index.ravel(), grad.ravel())
        return out[:-1]


@dataclass(frozen=True, eq=False)
class RewardPoint:
    """A reward tensor, optionally expressed through a feature map."""

    values: np.ndarray = field(repr=False)
    theta: Optional[np.ndarray] = None
    feature_map: Optional[FeatureMap] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.theta is not None:
            theta = np.asarray(self.theta, dtype=float)
            object.__setattr__(self, "theta", theta)
            if self.feature_map is None:
                raise ValueError("theta given without a feature map")
            if not np.array_equal(self.feature_map.expand(theta), values):
                raise ValueError("values do not equal the feature expansion of theta")

    @classmethod
    def from_theta(cls, feature_map, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(feature_map.expand(theta), theta=theta, feature_map=feature_map)

    def check_unit_range(self, atol=0.0):
        lo, hi = self.values.min(), self.values.max()
        if lo < -atol or hi > 1.0 + atol:
            raise ValueError(f"reward entries outside [0, 1]: min={lo}, max={hi}")


@dataclass(frozen=True)
class Trajectory:
    """A state-action path (s_1, a_1, ..., s_H, a_H, s_{H+1})."""

    states: tuple
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a trajectory needs H+1 states and H actions")

    @property
    def horizon(self):
        return len(self.actions)


def as_reward_array(r, shape=None):
    """Accept a RewardPoint or raw tensor and return a float ndarray."""
    values = r.values if isinstance(r, RewardPoint) else np.asarray(r, dtype=float)
    if shape is not None and values.shape != tuple(shape):
        raise ShapeError(f"reward shape {values.shape} != {tuple(shape)}")
    return values


def validate_policy(mdp, policy):
    policy = np.asarray(policy, dtype=float)
    if policy.shape != mdp.shape:
        raise ShapeError(f"policy shape {policy.shape} != {mdp.shape}")
    if np.any(policy < -ATOL):
        raise ValueError("policy has negative probabilities")
    sums = policy.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > ATOL:
        raise ValueError("policy rows do not sum to 1")
    return policy


def deterministic_policy(mdp, actions):
    """Build a 0/1 policy table from per-(h, s) action indices."""
    actions = np.asarray(actions, dtype=int)
    if actions.shape != (mdp.horizon, mdp.num_states):
        raise ShapeError(
            f"action table shape {actions.shape} != {(mdp.horizon, mdp.num_states)}"
        )
    policy = np.zeros(mdp.shape)
    h_idx, s_idx = np.indices(actions.shape)
    policy[h_idx, s_idx, actions] = 1.0
    return policy


def action_values(mdp, r):
    """Optimal action-value tensors Q[h, s, a] by backward induction."""
    r = as_reward_array(r, mdp.shape)
    H, S, A = mdp.shape
    q = np.empty((H, S, A))
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        q[h] = r[h] + mdp.transitions[h] @ v_next
        v_next = q[h].max(axis=1)
    return q


def backward_induction(mdp, r, tie_tol=ATOL):
    """Solve ``max_pi J^pi(r; p)`` exactly.

    Returns
    -------
    value : float
        The optimal expected return from the start state.
    policy : ndarray, shape (H, S, A)
        A deterministic optimal policy; ties broken by lowest action index.
    optimal_actions : ndarray of bool, shape (H, S, A)
        Per (h, s), the actions whose Q-value is within ``tie_tol`` of the max.
    """
    q = action_values(mdp, r)
    v = q.max(axis=2)
    optimal_actions = q >= v[:, :, None] - tie_tol
    greedy = q.argmax(axis=2)  # argmax returns the lowest maximizing index
    policy = deterministic_policy(mdp, greedy)
    return float(v[0, mdp.start_state]), policy, optimal_actions


def backward_induction_batch(mdp, rewards):
    """Optimal values for a batch of rewards, shape (B, H, S, A) -> (B,)."""
    rewards = np.asarray(rewards, dtype=float)
    B = rewards.shape[0]
    if rewards.shape[1:] != mdp.shape:
        raise ShapeError(f"batch reward shape {rewards.shape[1:]} != {mdp.shape}")
    H, S, A = mdp.shape
    v_next = np.zeros((B, S))
    for h in range(H - 1, -1, -1):
        # q[b, s, a] = r[b, h, s, a] + sum_s' p[h, s, a, s'] v_next[b, s']
        q = rewards[:, h] + np.einsum("saz,bz->bsa", mdp.transitions[h], v_next)
        v_next = q.max(axis=2)
    return v_next[:, mdp.start_state]


def policy_visitation(mdp, policy):
    """Visitation distribution d[h, s, a] induced by ``policy``."""
    policy = validate_policy(mdp, policy)
    H, S, A = mdp.shape
    d = np.zeros((H, S, A))
    state_dist = np.zeros(S)
    state_dist[mdp.start_state] = 1.0
    for h in range(H):
        d[h] = policy[h] * state_dist[:, None]
        if h + 1 < H:
            state_dist = np.einsum("sa,saz->z", d[h], mdp.transitions[h])
    return d


def trajectory_visitation(omega, num_states, num_actions):
    """0/1 indicator tensor of a trajectory, one entry per step."""
    H = omega.horizon
    if not all(0 <= s < num_states for s in omega.states):
        raise ValueError(f"trajectory state out of range [0, {num_states})")
    d = np.zeros((H, num_states, num_actions))
    for h in range(H):
        s, a = omega.states[h], omega.actions[h]
        if not 0 <= a < num_actions:
            raise ValueError(f"trajectory action {a} out of range at h={h}")
        d[h, s, a] = 1.0
    return d


def expected_return(d, r):
    """Inner product <d, r> of a visitation distribution and a reward."""
    d = np.asarray(d, dtype=float)
    r = as_reward_array(r)
    if d.shape != r.shape:
        raise ShapeError(f"visitation shape {d.shape} != reward shape {r.shape}")
    return float(np.vdot(d, r))


def trajectory_return(omega, r):
    """Return of a single trajectory under reward ``r`` by direct summation."""
    r = as_reward_array(r)
    return float(
        sum(r[h, omega.states[h], omega.actions[h]] for h in range(omega.horizon))
    )


def make_rng(seed):
    """The package-wide generator: PCG64, fully determined by the seed."""
    return np.random.Generator(np.random.PCG64(seed))


def _inverse_cdf(prob_rows, u):
    """Sample indices from categorical rows via inverse CDF in index order."""
    cum = np.cumsum(prob_rows, axis=-1)
    # guard against cumulative sums falling a hair short of 1
    cum[..., -1] = 1.0
    return np.sum(u[..., None] > cum, axis=-1)


def sample_trajectories(mdp, policy, n, seed):
    """Draw ``n`` i.i.d. trajectories of ``policy`` in ``mdp``.

    Sampling uses inverse-CDF draws over stored distributions in index order,
    so the output is bit-reproducible across platforms for a fixed seed.
    """
    policy = validate_policy(mdp, policy)
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = make_rng(seed)
    H = mdp.horizon
    states = np.empty((n, H + 1), dtype=int)
    actions = np.empty((n, H), dtype=int)
    states[:, 0] = mdp.start_state
    for h in range(H):
        cur = states[:, h]
        actions[:, h] = _inverse_cdf(policy[h, cur], rng.random(n))
        states[:, h + 1] = _inverse_cdf(
            mdp.transitions[h, cur, actions[:, h]], rng.random(n)
        )
    return [Trajectory(tuple(states[i]), tuple(actions[i])) for i in range(n)]


def enumerate_deterministic_returns(mdp, r):
    """Returns of every deterministic policy (A^(S*H) of them), for oracles."""
    from itertools import product

    r = as_reward_array(r, mdp.shape)
    H, S, A = mdp.shape
    out = []
    for assignment in product(range(A), repeat=S * H):
        table = np.asarray(assignment, dtype=int).reshape(H, S)
        policy = deterministic_policy(mdp, table)
        out.append(expected_return(policy_visitation(mdp, policy), r))
    return np.asarray(out)
