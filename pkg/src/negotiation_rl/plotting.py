"""PNG renderings of the CSV outputs (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import pareto_frontier  # noqa: E402


def _running_mean(x, window: int):
    x = np.asarray(x, float)
    if len(x) == 0:
        return x
    window = max(1, min(window, len(x)))
    c = np.cumsum(np.insert(x, 0, 0.0))
    out = (c[window:] - c[:-window]) / window
    return np.concatenate([np.full(window - 1, np.nan), out])


def plot_training(metrics: list, path, title: str = "", window: int = 100) -> None:
    """Running means of both rewards and the playout time per epoch."""
    m = np.asarray([[r[0], r[1], r[2], r[3]] for r in metrics], float).reshape(-1, 4)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(m[:, 0], _running_mean(m[:, 1], window), label="reward P1")
    ax.plot(m[:, 0], _running_mean(m[:, 2], window), label="reward P2")
    ax.set_xlabel("epoch")
    ax.set_ylabel("reward")
    ax2 = ax.twinx()
    ax2.plot(m[:, 0], _running_mean(m[:, 3], window), color="green", label="playout time")
    ax2.set_ylabel("rounds")
    ax.legend(loc="upper left")
    ax2.legend(loc="lower right")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_outcomes(points, scenario, path, title: str = "", nash=None, color=None) -> None:
    """Outcome-space scatter with the Pareto frontier overlaid."""
    pts = np.asarray(points, float).reshape(-1, 2)
    fr = pareto_frontier(scenario)
    fx = [p.u_a for p in fr.points]
    fy = [p.u_b for p in fr.points]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fx, fy, "k-", lw=1, label="Pareto frontier")
    if len(pts):
        sc = ax.scatter(pts[:, 0], pts[:, 1], s=8, c=color, cmap="viridis", alpha=0.6)
        if color is not None:
            fig.colorbar(sc, ax=ax)
    if nash is not None:
        ax.plot([nash[0]], [nash[1]], "r*", ms=12, label="Nash")
    ax.set_xlabel("utility A")
    ax.set_ylabel("utility B")
    ax.legend(loc="lower left")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_stopping(rows, path) -> None:
    """Closed-form stopping time against concession factor, one line per discount."""
    rows = np.asarray(rows, float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in np.unique(rows[:, 1]):
        sel = rows[rows[:, 1] == d]
        ax.plot(sel[:, 0], sel[:, 2], marker="o", label=f"d={d:g}")
    ax.set_xscale("log")
    ax.set_xlabel("concession factor c")
    ax.set_ylabel("optimal stopping time")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
