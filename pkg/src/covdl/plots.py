"""Figure rendering for experiment reports.  Headless (Agg) only."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_correlation_plot", "save_trace_plot"]


def save_correlation_plot(sorted_correlations, threshold: float, path) -> None:
    """Sorted matched-correlation curve with the recovery threshold marked."""
    values = np.asarray(sorted_correlations, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, values.size + 1), values, marker="o", ms=3.5, lw=1.2)
    ax.axhline(threshold, color="crimson", lw=1.0, ls="--", label=f"threshold {threshold}")
    ax.set_xlabel("matched column (sorted)")
    ax.set_ylabel("|correlation| with true column")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trace_plot(trace, path, ylabel: str = "objective") -> None:
    """Objective value per iteration, log scale when strictly positive."""
    values = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(values.size), values, lw=1.4)
    if values.size and np.all(values > 0.0):
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
