"""Figure rendering for solver traces.

Every traced run gets one diagnostics figure per extremum (objective value,
worst constraint violation and dual norm against the iteration counter), and
in feature mode an additional figure with the reward-weight iterates, the
series usually eyeballed to judge convergence.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_trace_figure(trace, title, out_path):
    """Three stacked panels of one extremum solve's per-iteration series."""
    iters = np.arange(len(trace.objective))
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    axes[0].plot(iters, trace.objective, lw=1.0)
    axes[0].set_ylabel("objective")
    axes[0].set_title(title)
    axes[1].plot(iters, trace.max_violation, lw=1.0, color="tab:red")
    axes[1].axhline(0.0, color="black", lw=0.6)
    axes[1].set_ylabel("max violation")
    axes[2].plot(iters, trace.dual_norm, lw=1.0, color="tab:green")
    axes[2].set_ylabel("dual norm")
    axes[2].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_reward_figure(trace, title, out_path, labels=None):
    """Feature-weight iterates over the run; only drawn when recorded."""
    if trace.primal is None:
        return None
    iters = np.arange(len(trace.primal))
    fig, ax = plt.subplots(figsize=(7, 4))
    for j in range(trace.primal.shape[1]):
        label = labels[j] if labels and j < len(labels) else f"w{j}"
        ax.plot(iters, trace.primal[:, j], lw=1.0, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("reward weight")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
