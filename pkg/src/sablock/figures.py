"""Render report figures next to the delimited outputs.

All functions write a PNG to the given path and return that path.
matplotlib is imported lazily so library users who never plot do not pay
for it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

__all__ = [
    "save_blocksize_sweep_figure",
    "save_fidelity_sweep_figure",
    "save_compare_figure",
    "save_tradeoff_figure",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_blocksize_sweep_figure(
    budgets: Sequence[int],
    histograms: Mapping[int, Mapping[int, int]],
    means: Mapping[int, float],
    path: str | Path,
) -> Path:
    """Stacked block-size proportions per budget with the mean size overlaid."""
    plt = _pyplot()
    sizes = sorted({g for hist in histograms.values() for g in hist})
    xs = range(len(budgets))
    fig, ax = plt.subplots(figsize=(7, 4))
    bottom = [0.0] * len(budgets)
    cmap = plt.get_cmap("viridis")
    for i, g in enumerate(sizes):
        fracs = []
        for b in budgets:
            hist = histograms[b]
            total = sum(hist.values()) or 1
            fracs.append(hist.get(g, 0) / total)
        ax.bar(
            xs,
            fracs,
            bottom=bottom,
            label=f"g={g}",
            color=cmap(i / max(len(sizes) - 1, 1)),
        )
        bottom = [b + f for b, f in zip(bottom, fracs)]
    ax.set_xticks(list(xs))
    ax.set_xticklabels([str(b) for b in budgets])
    ax.set_xlabel("cache budget")
    ax.set_ylabel("share of segments")
    ax.set_ylim(0, 1)
    ax2 = ax.twinx()
    ax2.plot(xs, [means[b] for b in budgets], "k--o", label="mean block size")
    ax2.set_ylabel("mean block size")
    ax.legend(loc="upper left", fontsize=8, ncol=2)
    ax2.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_fidelity_sweep_figure(
    budgets: Sequence[int],
    fidelity_by_policy: Mapping[str, Sequence[float]],
    path: str | Path,
) -> Path:
    """Per-policy retention fidelity versus budget."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for policy, values in fidelity_by_policy.items():
        ax.plot(budgets, values, marker="o", label=policy)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("cache budget")
    ax.set_ylabel("retention fidelity")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_compare_figure(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Grouped bars of fidelity (and needle recall when present) per policy."""
    plt = _pyplot()
    names = [str(r["policy"]) for r in rows]
    fidelity = [float(r["fidelity"]) for r in rows]
    recalls = [r.get("needle_recall") for r in rows]
    has_recall = any(r is not None for r in recalls)
    xs = range(len(names))
    width = 0.38 if has_recall else 0.7
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(names)), 4))
    ax.bar([x - width / 2 if has_recall else x for x in xs], fidelity, width, label="fidelity")
    if has_recall:
        ax.bar(
            [x + width / 2 for x in xs],
            [r if r is not None else 0.0 for r in recalls],
            width,
            label="needle recall",
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rate")
    ax.grid(axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_tradeoff_figure(
    sizes: Sequence[int],
    cross_rates: Sequence[float],
    redundancies: Sequence[float],
    path: str | Path,
) -> Path:
    """Cross-segment rate and fixed-block redundancy versus block size."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sizes, cross_rates, marker="o", label="cross-segment rate")
    ax.plot(sizes, redundancies, marker="s", label="fixed-block redundancy")
    ax.set_xlabel("block size")
    ax.set_ylabel("rate")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
