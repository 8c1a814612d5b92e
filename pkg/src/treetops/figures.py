"""Render one comparison figure per experiment run.

The layout is uniform across kinds: one panel per statistic, estimates with
error bars against N (tree kinds) or bridge length (bridge kinds), oracle
values drawn as a dashed reference. Files only; no interactive backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render(result, path) -> Path:
    path = Path(path)
    stats = []
    for row in result.rows:
        if row.statistic not in stats:
            stats.append(row.statistic)
    n_panels = max(1, len(stats))
    fig, axes = plt.subplots(1, n_panels, figsize=(4.2 * n_panels, 3.4),
                             squeeze=False)
    x_label = "bridge length n" if result.kind in ("ballot", "perturbation") else "N"
    for ax, stat in zip(axes[0], stats):
        rows = [r for r in result.rows if r.statistic == stat]
        xs = [r.N for r in rows]
        ys = [r.estimate for r in rows]
        es = [r.stderr if r.stderr is not None else 0.0 for r in rows]
        ax.errorbar(xs, ys, yerr=es, fmt="o-", capsize=3, ms=4, lw=1.0,
                    label="estimate")
        oracle = [(r.N, r.oracle) for r in rows if r.oracle is not None]
        if oracle:
            ax.plot([p[0] for p in oracle], [p[1] for p in oracle], "k--",
                    lw=1.0, alpha=0.7, label="oracle")
            ax.legend(fontsize=8, frameon=False)
        ax.set_xlabel(x_label)
        ax.set_title(stat, fontsize=10)
        ax.grid(True, alpha=0.25)
    if not stats:
        axes[0][0].set_axis_off()
        axes[0][0].text(0.5, 0.5, "no rows", ha="center", va="center")
    fig.suptitle(f"{result.kind}  [{result.config_hash}]", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
