import pytest

import robrel as rr


def random_mdp(rng, num_states=3, num_actions=2, horizon=3):
    """A random dense finite-horizon MDP."""
    p = rng.random((horizon, num_states, num_actions, num_states)) + 0.1
    p /= p.sum(axis=-1, keepdims=True)
    return rr.MdpSpec(num_states, num_actions, horizon, 0, p)


def random_policy(rng, mdp):
    pi = rng.random(mdp.shape) + 0.05
    return pi / pi.sum(axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return rr.make_rng(20240817)


@pytest.fixture(scope="session")
def lanes_experiment():
    from robrel.lanes import build_lanes

    exp, problem = build_lanes()
    return exp, problem
