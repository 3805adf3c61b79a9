"""Static figures for the analysis outputs (PNG, headless backend)."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CATEGORY_COLOURS = {"improved": "tab:green", "worsened": "tab:red", "unchanged": "tab:blue"}


def plot_curves(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Total reward on top, the four sub-reward sums below."""
    ep = [r["episode"] for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(ep, [r["total"] for r in rows], color="black", lw=1)
    top.set_ylabel("cumulative reward")
    for key in ("r_sidewalk", "r_ped", "r_veh", "r_park"):
        bottom.plot(ep, [r[key] for r in rows], lw=1, label=key)
    bottom.set_xlabel("episode")
    bottom.set_ylabel("sub-reward sum")
    bottom.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_edge_deltas(comparisons: Sequence, path: str | Path) -> Path:
    comps = sorted(comparisons, key=lambda c: c.delta)
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.16 * len(comps) + 1)))
    ax.barh(range(len(comps)), [c.delta for c in comps],
            color=[CATEGORY_COLOURS[c.category] for c in comps])
    ax.set_yticks(range(len(comps)))
    ax.set_yticklabels([c.edge_id for c in comps], fontsize=6)
    ax.axvline(0.0, color="grey", lw=0.6)
    metric = comps[0].metric if comps else ""
    ax.set_xlabel(f"{metric}: late minus early phase mean")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)
