"""Figure rendering for benchmark reports.

Kept separate from the solver so matplotlib is only imported on the report
path.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trace import ConvergenceTrace  # noqa: E402


def plot_convergence(traces: dict[str, ConvergenceTrace], bks: int | None,
                     out_path: Path, title: str = "") -> Path:
    """Step plot of best length (or gap when BKS is known) over time, one line per run."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for label, trace in sorted(traces.items()):
        ts = [ev.t for ev in trace.events]
        if bks:
            ys = [(ev.length - bks) / bks for ev in trace.events]
        else:
            ys = [ev.length for ev in trace.events]
        if ts:
            ts = ts + [trace.t_end]
            ys = ys + [ys[-1]]
        ax.step(ts, ys, where="post", label=label)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("gap to BKS" if bks else "tour length")
    if bks:
        ax.set_yscale("symlog", linthresh=1e-4)
    if title:
        ax.set_title(title)
    if len(traces) <= 12:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_gap_bars(aggregates: dict[str, dict], out_path: Path) -> Path:
    """Best/Avg gap bars per instance."""
    names = sorted(aggregates)
    best = [aggregates[n]["best_gap"] for n in names]
    avg = [aggregates[n]["avg_gap"] for n in names]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(max(6, len(names)), 4))
    ax.bar([i - 0.2 for i in x], best, width=0.4, label="Best")
    ax.bar([i + 0.2 for i in x], avg, width=0.4, label="Avg")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("gap to BKS")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
