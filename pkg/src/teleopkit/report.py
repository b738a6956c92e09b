"""Report figures rendered next to the delimited CLI outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_joint_trajectories(times, Q, path, title="joint trajectories",
                            labels=None):
    """One line per joint over time; returns the written path."""
    plt = _plt()
    times = np.asarray(times, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    fig, ax = plt.subplots(figsize=(9, 4.5), dpi=120)
    for k in range(Q.shape[1]):
        label = labels[k] if labels and k < len(labels) else f"j{k + 1}"
        ax.plot(times, Q[:, k], lw=1.2, label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("joint position [rad]")
    ax.set_title(title)
    if Q.shape[1] <= 12:
        ax.legend(ncol=4, fontsize=8)
    ax.grid(alpha=0.3)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_latency_histogram(samples_ms, path, title="round-trip latency"):
    plt = _plt()
    samples_ms = np.asarray(samples_ms, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4), dpi=120)
    ax.hist(samples_ms, bins=60, color="tab:blue", alpha=0.85)
    for q, color in ((50, "tab:green"), (99, "tab:red")):
        v = float(np.percentile(samples_ms, q))
        ax.axvline(v, color=color, ls="--", lw=1.2, label=f"p{q} = {v:.3f} ms")
    ax.set_xlabel("round trip [ms]")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_ik_report(times, errors_pos, errors_ori, objectives, path,
                   title="ik solution quality"):
    plt = _plt()
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), dpi=120, sharex=True)
    axes[0].semilogy(times, np.maximum(errors_pos, 1e-12), label="position error [m]")
    axes[0].semilogy(times, np.maximum(errors_ori, 1e-12), label="orientation error [rad]")
    axes[0].legend()
    axes[0].grid(alpha=0.3)
    axes[0].set_title(title)
    axes[1].plot(times, objectives, color="tab:purple")
    axes[1].set_ylabel("objective")
    axes[1].set_xlabel("time [s]")
    axes[1].grid(alpha=0.3)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
