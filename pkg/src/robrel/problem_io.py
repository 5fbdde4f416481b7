"""Problem-spec files: a versioned JSON schema for solver inputs.

A spec file names the environments (transition tensors indexed
``[h][s][a][s']``, or a stationary kernel broadcast over steps), an optional
feature map, the objective policy pair, the feedback list (whose order fixes
the dual layout), hyperparameters, and the mode (exact or estimated, with
sample budgets and a seed).  Loading validates everything and reports
failures with a path to the offending field.

``loads(dumps(spec))`` is the identity on the canonical form: parsed specs
are normalized dicts that serialize with sorted keys and fixed indentation.
"""

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import feedback as fb
from .estimation import (
    ForwardModel,
    TrajectoryDataset,
    estimate_transitions,
    estimate_visitation,
)
from .mdp import (
    FeatureMap,
    MdpSpec,
    Trajectory,
    deterministic_policy,
    policy_visitation,
    sample_trajectories,
    trajectory_visitation,
    validate_policy,
)
from .oracle import RewardGrid, grid_slater_point
from .solver import Hyperparams, RobRelProblem, default_hyperparams

SCHEMA_VERSION = 1

VARIANT_NAMES = {
    "demonstration": fb.Variant.DEMONSTRATION,
    "trajectory_comparison": fb.Variant.TRAJECTORY_COMPARISON,
    "policy_comparison": fb.Variant.POLICY_COMPARISON,
    "fractional_comparison": fb.Variant.FRACTIONAL_COMPARISON,
    "bad_policy_demonstration": fb.Variant.BAD_POLICY_DEMONSTRATION,
}


class SpecError(ValueError):
    """A schema violation, annotated with the path to the bad field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _get(obj, key, path, required=True, default=None):
    if key not in obj:
        if required:
            raise SpecError(path, f"missing field {key!r}")
        return default
    return obj[key]


def _load_environment(name, node):
    path = f"environments.{name}"
    S = int(_get(node, "num_states", path))
    A = int(_get(node, "num_actions", path))
    H = int(_get(node, "horizon", path))
    s0 = int(_get(node, "start_state", path))
    stationary = node.get("stationary_transitions")
    full = node.get("transitions")
    if (stationary is None) == (full is None):
        raise SpecError(
            path, "give exactly one of 'transitions' or 'stationary_transitions'"
        )
    try:
        if stationary is not None:
            return MdpSpec.stationary(S, A, H, s0, np.asarray(stationary, float))
        return MdpSpec(S, A, H, s0, np.asarray(full, float))
    except ValueError as exc:
        raise SpecError(path, str(exc)) from exc


def _load_policy(node, env, path):
    """A policy slot: an action table [h][s], or a probability tensor."""
    arr = np.asarray(node, dtype=float)
    if arr.shape == (env.horizon, env.num_states):
        return deterministic_policy(env, arr.astype(int))
    if arr.shape == env.shape:
        try:
            return validate_policy(env, arr)
        except ValueError as exc:
            raise SpecError(path, str(exc)) from exc
    raise SpecError(
        path,
        f"policy shape {arr.shape} is neither an action table "
        f"{(env.horizon, env.num_states)} nor a tensor {env.shape}",
    )


def _load_trajectory(node, env, path):
    states = _get(node, "states", path)
    actions = _get(node, "actions", path)
    try:
        traj = Trajectory(states, actions)
    except ValueError as exc:
        raise SpecError(path, str(exc)) from exc
    if traj.horizon != env.horizon:
        raise SpecError(path, f"trajectory horizon {traj.horizon} != {env.horizon}")
    for h, (s, a) in enumerate(zip(traj.states[:-1], traj.actions)):
        if not (0 <= s < env.num_states and 0 <= a < env.num_actions):
            raise SpecError(path, f"index (s={s}, a={a}) out of range at step {h}")
    return traj


def _load_dataset_file(base_dir, rel_path, env, path):
    file_path = Path(base_dir) / rel_path
    if not file_path.exists():
        raise SpecError(path, f"dataset file not found: {file_path}")
    with open(file_path) as fh:
        node = json.load(fh)
    rows = _get(node, "trajectories", path)
    trajs = [_load_trajectory(row, env, f"{path}[{i}]") for i, row in enumerate(rows)]
    if not trajs:
        raise SpecError(path, "dataset file holds no trajectories")
    return TrajectoryDataset(trajs, source=str(rel_path))


@dataclass
class PolicySlot:
    """A policy reference: an explicit table or a trajectory dataset path."""

    policy: np.ndarray = None
    dataset: TrajectoryDataset = None

    def visitation(self, env, mode, n, seed):
        """Fill this slot's visitation: exact, from its dataset, or sampled."""
        if self.dataset is not None:
            return estimate_visitation(self.dataset, env.num_states, env.num_actions)
        if mode == "exact":
            return policy_visitation(env, self.policy)
        data = TrajectoryDataset(sample_trajectories(env, self.policy, n, seed))
        return estimate_visitation(data, env.num_states, env.num_actions)


def _load_policy_slot(node, env, base_dir, path):
    if isinstance(node, dict) and "file" in node:
        return PolicySlot(dataset=_load_dataset_file(base_dir, node["file"], env, path))
    return PolicySlot(policy=_load_policy(node, env, path))


@dataclass
class ParsedSpec:
    """A validated spec file, with enough structure to build the problem."""

    raw: dict
    environments: dict
    feature_map: object
    objective_env: MdpSpec
    policy_slots: tuple
    feedback_nodes: list
    extra_nodes: list
    hyper_node: dict
    mode: str
    estimation_node: dict
    base_dir: Path


def parse_spec(data, base_dir="."):
    """Validate a spec dict into a ParsedSpec (no estimation yet)."""
    version = _get(data, "schema_version", "$")
    if version != SCHEMA_VERSION:
        raise SpecError("schema_version", f"unsupported version {version!r}")
    mode = data.get("mode", "exact")
    if mode not in ("exact", "estimated"):
        raise SpecError("mode", f"must be 'exact' or 'estimated', got {mode!r}")

    env_nodes = _get(data, "environments", "$")
    if not env_nodes:
        raise SpecError("environments", "at least one environment is required")
    environments = {
        name: _load_environment(name, node) for name, node in env_nodes.items()
    }

    fmap_node = data.get("feature_map", "tabular")
    if fmap_node == "tabular":
        feature_map = None
    else:
        idx = np.asarray(_get(fmap_node, "index", "feature_map"), dtype=int)
        d = int(_get(fmap_node, "num_features", "feature_map"))
        try:
            feature_map = FeatureMap(idx, d)
        except ValueError as exc:
            raise SpecError("feature_map", str(exc)) from exc

    objective = _get(data, "objective", "$")
    env_name = _get(objective, "environment", "objective")
    if env_name not in environments:
        raise SpecError("objective.environment", f"unknown environment {env_name!r}")
    objective_env = environments[env_name]
    if feature_map is not None and feature_map.shape != objective_env.shape:
        raise SpecError("feature_map", "index shape does not match the objective env")
    slots = tuple(
        _load_policy_slot(
            _get(objective, key, "objective"), objective_env, base_dir,
            f"objective.{key}",
        )
        for key in ("policy1", "policy2")
    )

    feedback_nodes = _get(data, "feedback", "$")
    extra_nodes = data.get("extra_feedback", [])
    for where, nodes in (("feedback", feedback_nodes), ("extra_feedback", extra_nodes)):
        for i, node in enumerate(nodes):
            path = f"{where}[{i}]"
            variant = _get(node, "variant", path)
            if variant not in VARIANT_NAMES:
                raise SpecError(path, f"unknown variant {variant!r}")
            name = _get(node, "environment", path)
            if name not in environments:
                raise SpecError(path, f"unknown environment {name!r}")
            env = environments[name]
            if env.shape != objective_env.shape:
                raise SpecError(path, "environment sizes differ from the objective's")

    hyper_node = _get(data, "hyperparameters", "$")
    estimation_node = data.get("estimation", {})
    if mode == "estimated" and "seed" not in estimation_node:
        raise SpecError("estimation.seed", "estimated mode needs a seed")

    return ParsedSpec(
        raw=data,
        environments=environments,
        feature_map=feature_map,
        objective_env=objective_env,
        policy_slots=slots,
        feedback_nodes=list(feedback_nodes),
        extra_nodes=list(extra_nodes),
        hyper_node=dict(hyper_node),
        mode=mode,
        estimation_node=dict(estimation_node),
        base_dir=Path(base_dir),
    )


def _feedback_constraint(spec, node, index, where="feedback"):
    """Build one constraint, honoring the spec's mode."""
    path = f"{where}[{index}]"
    variant = VARIANT_NAMES[node["variant"]]
    env = spec.environments[node["environment"]]
    t = float(node.get("t", 0.0))
    if not math.isfinite(t):
        raise SpecError(path, "slack t must be finite")
    est = spec.estimation_node
    seed = est.get("seed", 0)
    n = est.get("num_trajectories")

    if variant is fb.Variant.TRAJECTORY_COMPARISON:
        t1 = _load_trajectory(_get(node, "trajectory1", path), env, f"{path}.trajectory1")
        t2 = _load_trajectory(_get(node, "trajectory2", path), env, f"{path}.trajectory2")
        d1 = trajectory_visitation(t1, env.num_states, env.num_actions)
        d2 = trajectory_visitation(t2, env.num_states, env.num_actions)
        return fb.trajectory_comparison(d1, d2, t=t)

    if variant in (fb.Variant.DEMONSTRATION, fb.Variant.BAD_POLICY_DEMONSTRATION):
        slot = _load_policy_slot(_get(node, "policy", path), env, spec.base_dir,
                                 f"{path}.policy")
        if spec.mode == "estimated":
            if slot.policy is not None and n is None:
                raise SpecError(path, "estimated mode needs estimation.num_trajectories")
            budget = est.get("model_budget", 0)
            model = ForwardModel(env, seed=(seed, where == "extra_feedback", index, 0))
            env_used = estimate_transitions(model=model, budget=budget)
        else:
            env_used = env
        d = slot.visitation(env, spec.mode, n, (seed, where == "extra_feedback", index, 1))
        ctor = (
            fb.demonstration
            if variant is fb.Variant.DEMONSTRATION
            else fb.bad_policy_demonstration
        )
        return ctor(env_used, d, t=t)

    slot1 = _load_policy_slot(_get(node, "policy1", path), env, spec.base_dir,
                              f"{path}.policy1")
    slot2 = _load_policy_slot(_get(node, "policy2", path), env, spec.base_dir,
                              f"{path}.policy2")
    if spec.mode == "estimated" and n is None and (
        slot1.policy is not None or slot2.policy is not None
    ):
        raise SpecError(path, "estimated mode needs estimation.num_trajectories")
    d1 = slot1.visitation(env, spec.mode, n, (seed, where == "extra_feedback", index, 1))
    d2 = slot2.visitation(env, spec.mode, n, (seed, where == "extra_feedback", index, 2))
    if variant is fb.Variant.FRACTIONAL_COMPARISON:
        ratio = node.get("ratio")
        if ratio is None or not 0 < float(ratio) <= 1:
            raise SpecError(path, "fractional comparison needs ratio in (0, 1]")
        return fb.fractional_comparison(d1, d2, ratio=float(ratio))
    return fb.policy_comparison(d1, d2, t=t)


def resolve_hyperparams(spec, num_constraints, overrides=None, margin_estimator=None):
    """Hyperparams from the spec node, CLI overrides winning.

    ``iterations`` is always required.  The step size and dual radius come
    either explicitly or derived from an accuracy ``epsilon`` and a margin
    ``xi`` through the principled formulas; when the margin is not supplied
    but a ``margin_estimator`` is available (feature mode), a coarse grid
    search fills it in.
    """
    node = dict(spec.hyper_node)
    node.update({k: v for k, v in (overrides or {}).items() if v is not None})
    iters = node.get("iterations")
    if iters is None:
        raise SpecError("hyperparameters.iterations", "missing iteration count")
    alpha, radius = node.get("step_size"), node.get("dual_radius")
    epsilon, xi = node.get("epsilon"), node.get("xi")
    xi_estimated = False
    if (alpha is None or radius is None) and epsilon is not None and xi is None:
        if margin_estimator is not None:
            xi = margin_estimator()
            xi_estimated = True
            if not xi > 0:
                raise SpecError(
                    "hyperparameters.xi",
                    f"no strictly feasible reward found on a coarse grid "
                    f"(best margin {xi}); supply xi or step_size directly",
                )
    if (alpha is None or radius is None) and (epsilon is None or xi is None):
        raise SpecError(
            "hyperparameters",
            "give step_size and dual_radius, or epsilon and xi to derive them",
        )
    if alpha is None or radius is None:
        env = spec.objective_env
        try:
            derived = default_hyperparams(
                env.horizon, env.num_states, env.num_actions,
                float(xi), float(epsilon), num_constraints,
            )
        except ValueError as exc:
            raise SpecError("hyperparameters", str(exc)) from exc
        alpha = derived.step_size if alpha is None else alpha
        radius = derived.dual_radius if radius is None else radius
    used = {
        "iterations": int(iters),
        "step_size": float(alpha),
        "dual_radius": float(radius),
    }
    if epsilon is not None:
        used["epsilon"] = float(epsilon)
    if xi is not None:
        used["xi"] = float(xi)
        if xi_estimated:
            used["xi_estimated"] = True
    return Hyperparams(int(iters), float(alpha), float(radius)), used


def build_problem(spec, overrides=None, warn=sys.stderr):
    """Turn a ParsedSpec into a RobRelProblem, plus the extra constraints.

    In estimated mode this is where sampling happens (deterministic given
    the spec's seed).  A warning is printed when a coarse grid search finds
    no strictly feasible reward, since the dual-radius formulas presume one.
    """
    constraints = tuple(
        _feedback_constraint(spec, node, i)
        for i, node in enumerate(spec.feedback_nodes)
    )
    fset = fb.FeasibleSetSpec(constraints)
    extras = tuple(
        _feedback_constraint(spec, node, i, where="extra_feedback")
        for i, node in enumerate(spec.extra_nodes)
    )

    est = spec.estimation_node
    seed = est.get("seed", 0)
    n_obj = est.get("objective_trajectories", est.get("num_trajectories"))
    if spec.mode == "estimated" and n_obj is None and any(
        s.policy is not None for s in spec.policy_slots
    ):
        raise SpecError("estimation", "estimated mode needs objective_trajectories")
    d1 = spec.policy_slots[0].visitation(spec.objective_env, spec.mode, n_obj, (seed, 100))
    d2 = spec.policy_slots[1].visitation(spec.objective_env, spec.mode, n_obj, (seed, 101))

    margin_estimator = None
    if spec.feature_map is not None and RewardGrid(0.1, spec.feature_map.num_features).num_points <= 10**6:

        def margin_estimator():
            _, margin = grid_slater_point(
                fset,
                RewardGrid(0.1, spec.feature_map.num_features),
                spec.objective_env.shape,
                feature_map=spec.feature_map,
            )
            # an unconstrained problem reports an unbounded margin; any value
            # beyond 2H leaves the derived radius essentially unchanged
            return min(margin, 2.0 * spec.objective_env.horizon)

    hyper, used = resolve_hyperparams(
        spec, len(fset), overrides, margin_estimator=margin_estimator
    )
    problem = RobRelProblem(d1 - d2, fset, hyper, feature_map=spec.feature_map)

    if warn is not None and spec.feature_map is not None:
        grid = RewardGrid(0.25, spec.feature_map.num_features)
        if grid.num_points <= 10**5:
            _, margin = grid_slater_point(
                fset, grid, spec.objective_env.shape, feature_map=spec.feature_map
            )
            if margin <= 0:
                print(
                    "warning: no strictly feasible reward found on a coarse grid "
                    f"(best margin {margin:.4f}); the feasible set may be empty",
                    file=warn,
                )
    return problem, extras, used


def canonical_dumps(data):
    """The canonical byte form: sorted keys, two-space indent, newline end."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def load_spec_file(path):
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    return parse_spec(data, base_dir=path.parent)


def save_spec_file(path, data):
    Path(path).write_text(canonical_dumps(data))


def lanes_spec_dict(experiment, hyper=None, grid_res=0.02):
    """The built-in lanes benchmark as a canonical problem-spec dict."""
    from .lanes import (
        COMPARISON_LAYOUT,
        DEMONSTRATION_LAYOUT,
        DEMONSTRATION_SLACK,
        POLICY_SLACKS,
        TARGET_LAYOUT,
        TRAJECTORY_SLACKS,
    )

    def env_node(env):
        return {
            "num_states": env.num_states,
            "num_actions": env.num_actions,
            "horizon": env.horizon,
            "start_state": env.start_state,
            "transitions": env.transitions.tolist(),
        }

    def policy_table(policy):
        return np.argmax(policy, axis=2).tolist()

    raw = experiment.raw_feedback
    feedback_nodes = []
    for node in raw:
        if node.variant is fb.Variant.TRAJECTORY_COMPARISON:
            feedback_nodes.append(
                {
                    "variant": "trajectory_comparison",
                    "environment": "target",
                    "trajectory1": {
                        "states": list(node.traj1.states),
                        "actions": list(node.traj1.actions),
                    },
                    "trajectory2": {
                        "states": list(node.traj2.states),
                        "actions": list(node.traj2.actions),
                    },
                    "t": node.t,
                }
            )
        elif node.variant is fb.Variant.POLICY_COMPARISON:
            feedback_nodes.append(
                {
                    "variant": "policy_comparison",
                    "environment": "comparison",
                    "policy1": policy_table(node.policy1),
                    "policy2": policy_table(node.policy2),
                    "t": node.t,
                }
            )
        else:
            feedback_nodes.append(
                {
                    "variant": "demonstration",
                    "environment": "demonstration",
                    "policy": policy_table(node.policy1),
                    "t": node.t,
                }
            )

    hyper_node = {
        "iterations": 1200,
        "step_size": 0.01,
        "dual_radius": 81.0,
    }
    if hyper is not None:
        hyper_node = {
            "iterations": hyper.iterations,
            "step_size": hyper.step_size,
            "dual_radius": hyper.dual_radius,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": "exact",
        "comment": {
            "target_layout": list(TARGET_LAYOUT),
            "comparison_layout": list(COMPARISON_LAYOUT),
            "demonstration_layout": list(DEMONSTRATION_LAYOUT),
            "trajectory_slacks": list(TRAJECTORY_SLACKS),
            "policy_slacks": list(POLICY_SLACKS),
            "demonstration_slack": DEMONSTRATION_SLACK,
            "grid_resolution": grid_res,
        },
        "environments": {
            "target": env_node(experiment.target),
            "comparison": env_node(experiment.comparison_env),
            "demonstration": env_node(experiment.demonstration_env),
        },
        "feature_map": {
            "num_features": experiment.feature_map.num_features,
            "index": experiment.feature_map.index.tolist(),
        },
        "objective": {
            "environment": "target",
            "policy1": policy_table(experiment.policy_right),
            "policy2": policy_table(experiment.policy_left),
        },
        "feedback": feedback_nodes,
        "hyperparameters": hyper_node,
    }
