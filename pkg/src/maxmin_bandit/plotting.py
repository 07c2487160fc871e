"""Regret-curve rendering to standalone SVG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import BatchSummary, RunTrace

__all__ = ["emit_plot_svg"]

# Stable element ids keep repeated renders byte-comparable.
matplotlib.rcParams["svg.hashsalt"] = "maxmin-bandit"


def emit_plot_svg(
    obj: RunTrace | BatchSummary,
    destination: str | Path,
    title: str = "Cumulative max-min regret",
) -> None:
    """Render a regret curve; batch summaries get a +/-1 std band."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        if isinstance(obj, RunTrace):
            turns = np.array([cp.turn for cp in obj.checkpoints])
            mean = np.array([cp.cumulative_regret for cp in obj.checkpoints])
        else:
            turns = np.asarray(obj.turns)
            mean = np.asarray(obj.mean_regret)
            std = np.asarray(obj.std_regret)
            ax.fill_between(
                turns,
                mean - std,
                mean + std,
                alpha=0.3,
                color="tab:blue",
                linewidth=0,
                label="+/- 1 std",
            )
        if len(turns) == 0:
            raise ValueError("nothing to plot: no checkpoints")
        ax.plot(turns, mean, color="tab:blue", label="mean")
        ax.set_xlabel("turn")
        ax.set_ylabel("cumulative regret")
        ax.set_title(title)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(destination, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
