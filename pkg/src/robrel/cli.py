"""Command-line interface.

Subcommands: ``solve`` (run the primal-dual solver on a problem spec),
``oracle`` (brute-force grid extrema for the same spec), ``infogain``
(worst-case-error reduction of each entry in the spec's extra_feedback
list), and ``experiment lanes`` (build, solve and cross-check the bundled
three-lane benchmark).

All outputs are deterministic for a fixed spec and seed: reports are
canonical JSON and traces are CSV with repr-formatted floats.  Wall-clock
times go to stdout only.  Exit codes: 0 success, 1 invalid or infeasible
spec, 2 I/O failure.
"""

import csv
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .lanes import build_lanes
from .oracle import EmptyFeasibleGridError, RewardGrid, grid_extrema, grid_slater_point
from .problem_io import (
    SpecError,
    build_problem,
    canonical_dumps,
    lanes_spec_dict,
    load_spec_file,
    save_spec_file,
)
from .solver import (
    Hyperparams,
    information_gain,
    rob_rel,
    subgradient_norm_bounds,
)

EXIT_BAD_SPEC = 1
EXIT_IO = 2

TRACE_COLUMNS = ("iter", "objective", "max_violation", "dual_norm")


def _out_dir(option_value):
    root = option_value or os.environ.get("ROBREL_OUT_DIR") or "."
    path = Path(root)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        click.echo(f"error: cannot create output directory {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    return path


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _write_trace_csv(path, trace):
    rows = len(trace.objective)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for k in range(rows):
                writer.writerow(
                    [
                        k,
                        repr(float(trace.objective[k])),
                        repr(float(trace.max_violation[k])),
                        repr(float(trace.dual_norm[k])),
                    ]
                )
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _load_spec(spec_path):
    try:
        return load_spec_file(spec_path)
    except FileNotFoundError:
        click.echo(f"error: spec file not found: {spec_path}", err=True)
        sys.exit(EXIT_IO)
    except OSError as exc:
        click.echo(f"error: cannot read {spec_path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    except (json.JSONDecodeError, SpecError, ValueError) as exc:
        click.echo(f"error: invalid spec: {exc}", err=True)
        sys.exit(EXIT_BAD_SPEC)


def _build(spec, overrides):
    try:
        return build_problem(spec, overrides=overrides)
    except (SpecError, ValueError) as exc:
        click.echo(f"error: invalid spec: {exc}", err=True)
        sys.exit(EXIT_BAD_SPEC)


def _reward_payload(reward):
    if reward.theta is not None:
        return {"weights": [float(v) for v in reward.theta]}
    return {"values": np.asarray(reward.values).tolist()}


def _solve_outputs(problem, used_hyper, out, trace, seed, extra_report=None):
    t0 = time.perf_counter()
    report = rob_rel(problem, record_trace=True)
    wall = time.perf_counter() - t0
    bound_r, bound_lam = subgradient_norm_bounds(
        problem.horizon, problem.hyper.dual_radius, len(problem.fset)
    )
    payload = {
        "tool": {"name": "robrel", "version": __version__, "command": "solve"},
        "hyperparameters": used_hyper,
        "seed": seed,
        "num_constraints": len(problem.fset),
        "results": {
            "lower": report.lower,
            "upper": report.upper,
            "prediction": report.prediction,
            "worst_case_error": report.worst_case_error,
        },
        "reward_at_lower": _reward_payload(report.reward_at_lower),
        "reward_at_upper": _reward_payload(report.reward_at_upper),
        "subgradient_norm_bounds": {
            "primal": bound_r,
            "dual": bound_lam,
            "max_primal_seen": float(
                max(report.trace_lower.grad_r_norm.max(),
                    report.trace_upper.grad_r_norm.max())
            ),
            "max_dual_seen": float(
                max(report.trace_lower.grad_lam_norm.max(),
                    report.trace_upper.grad_lam_norm.max())
            ),
        },
    }
    if extra_report:
        payload.update(extra_report)
    files = {}
    if trace:
        for tag, tr in (("min", report.trace_lower), ("max", report.trace_upper)):
            csv_path = out / f"trace_{tag}.csv"
            _write_trace_csv(csv_path, tr)
            files[f"trace_{tag}"] = csv_path.name
            from .plotting import render_trace_figure, render_reward_figure

            fig = render_trace_figure(tr, f"extremum: {tag}", out / f"fig_{tag}.png")
            files[f"fig_{tag}"] = Path(fig).name
            rfig = render_reward_figure(
                tr, f"reward weights: {tag}", out / f"fig_rewards_{tag}.png"
            )
            if rfig is not None:
                files[f"fig_rewards_{tag}"] = Path(rfig).name
    payload["files"] = files
    _write_text(out / "report.json", canonical_dumps(payload))
    click.echo(
        f"lower={report.lower:.6f} upper={report.upper:.6f} "
        f"prediction={report.prediction:.6f} "
        f"worst_case_error={report.worst_case_error:.6f}"
    )
    click.echo(f"report written to {out / 'report.json'} ({wall:.2f}s)")
    return report


def _hyper_overrides(iters, alpha, dual_radius, epsilon, xi):
    return {
        "iterations": iters,
        "step_size": alpha,
        "dual_radius": dual_radius,
        "epsilon": epsilon,
        "xi": xi,
    }


spec_option = click.option("--spec", required=True, type=click.Path(), help="Problem spec JSON file.")
iters_option = click.option("--iters", type=int, default=None, help="Iteration count override.")
alpha_option = click.option("--alpha", type=float, default=None, help="Step size override.")
radius_option = click.option("--dual-radius", type=float, default=None, help="Dual radius override.")
epsilon_option = click.option("--epsilon", type=float, default=None, help="Accuracy target used to derive the step size.")
xi_option = click.option("--xi", type=float, default=None, help="Strict-feasibility margin used to derive hyperparameters.")
grid_option = click.option("--grid-res", type=float, default=0.02, show_default=True, help="Oracle grid resolution.")
seed_option = click.option("--seed", type=int, default=None, help="Seed override for estimated mode.")
out_option = click.option("--out-dir", type=click.Path(), default=None, help="Output directory (default: $ROBREL_OUT_DIR or '.').")
trace_option = click.option("--trace/--no-trace", default=True, show_default=True, help="Write per-iteration CSV traces and figures.")


@click.group()
@click.version_option(version=__version__)
def main():
    """Robust prediction of policy-preference gaps from reward feedback."""


@main.command()
@spec_option
@iters_option
@alpha_option
@radius_option
@epsilon_option
@xi_option
@seed_option
@out_option
@trace_option
def solve(spec, iters, alpha, dual_radius, epsilon, xi, seed, out_dir, trace):
    """Run the primal-dual solver on a problem spec."""
    out = _out_dir(out_dir)
    parsed = _load_spec(spec)
    if seed is not None:
        parsed.estimation_node["seed"] = seed
    problem, _, used = _build(parsed, _hyper_overrides(iters, alpha, dual_radius, epsilon, xi))
    _solve_outputs(problem, used, out, trace, parsed.estimation_node.get("seed"))


@main.command()
@spec_option
@grid_option
@out_option
def oracle(spec, grid_res, out_dir):
    """Brute-force grid extrema of the objective over the feasible set."""
    out = _out_dir(out_dir)
    parsed = _load_spec(spec)
    problem, _, _ = _build(parsed, {"iterations": 1, "step_size": 1.0, "dual_radius": 0.0})
    if problem.feature_map is None and parsed.objective_env.num_states > 1:
        click.echo(
            "error: the tabular grid would be astronomically large; "
            "oracle runs need a feature map (or a one-state environment)",
            err=True,
        )
        sys.exit(EXIT_BAD_SPEC)
    dim = (
        problem.feature_map.num_features
        if problem.feature_map is not None
        else int(np.prod(parsed.objective_env.shape))
    )
    grid = RewardGrid(grid_res, dim)
    t0 = time.perf_counter()
    try:
        lo, hi, arg_lo, arg_hi = grid_extrema(
            problem.fset, problem.delta_d, grid, feature_map=problem.feature_map
        )
    except (EmptyFeasibleGridError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BAD_SPEC)
    wall = time.perf_counter() - t0
    _, margin = grid_slater_point(
        problem.fset, grid, parsed.objective_env.shape, feature_map=problem.feature_map
    )
    payload = {
        "tool": {"name": "robrel", "version": __version__, "command": "oracle"},
        "grid": {"resolution": grid_res, "dimension": dim, "points": grid.num_points},
        "results": {
            "lower": lo,
            "upper": hi,
            "prediction": (hi + lo) / 2,
            "worst_case_error": (hi - lo) / 2,
            "slater_margin": margin,
        },
        "reward_at_lower": _reward_payload(arg_lo),
        "reward_at_upper": _reward_payload(arg_hi),
    }
    _write_text(out / "oracle_report.json", canonical_dumps(payload))
    click.echo(f"lower={lo:.6f} upper={hi:.6f} slater_margin={margin:.6f}")
    click.echo(f"oracle report written to {out / 'oracle_report.json'} ({wall:.2f}s)")


@main.command()
@spec_option
@iters_option
@alpha_option
@radius_option
@epsilon_option
@xi_option
@grid_option
@click.option("--use-oracle", is_flag=True, help="Evaluate gains on the grid instead of rerunning the solver.")
@seed_option
@out_option
def infogain(spec, iters, alpha, dual_radius, epsilon, xi, grid_res, use_oracle, seed, out_dir):
    """Error reduction from each extra_feedback entry in the spec."""
    out = _out_dir(out_dir)
    parsed = _load_spec(spec)
    if seed is not None:
        parsed.estimation_node["seed"] = seed
    problem, extras, used = _build(parsed, _hyper_overrides(iters, alpha, dual_radius, epsilon, xi))
    if not extras:
        click.echo("error: the spec has no extra_feedback entries", err=True)
        sys.exit(EXIT_BAD_SPEC)
    grid = None
    method = "pdsm"
    if use_oracle:
        if problem.feature_map is None:
            click.echo("error: --use-oracle needs a feature map", err=True)
            sys.exit(EXIT_BAD_SPEC)
        grid = RewardGrid(grid_res, problem.feature_map.num_features)
        method = "oracle"
    t0 = time.perf_counter()
    gains = []
    for i, extra in enumerate(extras):
        try:
            gain = information_gain(problem, extra, method=method, grid=grid)
        except (EmptyFeasibleGridError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BAD_SPEC)
        gains.append({"index": i, "gain": float(gain)})
    wall = time.perf_counter() - t0
    payload = {
        "tool": {"name": "robrel", "version": __version__, "command": "infogain"},
        "method": method,
        "hyperparameters": used,
        "gains": gains,
    }
    _write_text(out / "infogain_report.json", canonical_dumps(payload))
    for row in gains:
        click.echo(f"extra_feedback[{row['index']}]: gain={row['gain']:.6f}")
    click.echo(f"infogain report written to {out / 'infogain_report.json'} ({wall:.2f}s)")


@main.group()
def experiment():
    """Bundled benchmark experiments."""


@experiment.command()
@iters_option
@alpha_option
@radius_option
@grid_option
@seed_option
@out_option
@trace_option
def lanes(iters, alpha, dual_radius, grid_res, seed, out_dir, trace):
    """Build, solve and cross-check the three-lane benchmark."""
    out = _out_dir(out_dir)
    hyper = Hyperparams(
        iterations=iters or 1200,
        step_size=alpha or 0.01,
        dual_radius=dual_radius or 81.0,
    )
    exp, problem = build_lanes(hyper=hyper)
    save_spec_file(out / "lanes_spec.json", lanes_spec_dict(exp, hyper=hyper, grid_res=grid_res))

    grid = RewardGrid(grid_res, exp.feature_map.num_features)
    lo, hi, _, _ = grid_extrema(
        problem.fset, problem.delta_d, grid, feature_map=problem.feature_map
    )
    used = {
        "iterations": hyper.iterations,
        "step_size": hyper.step_size,
        "dual_radius": hyper.dual_radius,
    }
    extra = {
        "benchmark": {
            "true_gap": exp.true_gap,
            "true_reward": [float(v) for v in exp.true_reward.theta],
            "oracle": {
                "grid_resolution": grid_res,
                "lower": lo,
                "upper": hi,
                "prediction": (hi + lo) / 2,
                "worst_case_error": (hi - lo) / 2,
            },
        }
    }
    report = _solve_outputs(problem, used, out, trace, seed, extra_report=extra)
    click.echo(
        f"oracle: lower={lo:.6f} upper={hi:.6f}; "
        f"solver gap error: lower {abs(report.lower - lo):.4f}, "
        f"upper {abs(report.upper - hi):.4f}"
    )


if __name__ == "__main__":
    main()
