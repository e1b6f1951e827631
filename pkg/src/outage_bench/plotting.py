"""Figure rendering for the sweep commands.

Takes the same row dicts the CSV writer sees and draws outage-vs-sweep
curves: solid lines for the tightened bound, dashed for the loose bound,
markers with error bars for the Monte Carlo estimates. Files are written
through the Agg backend, so no display is needed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["plot_rate_sweep", "plot_error_sweep"]


def _by_user(rows):
    users = sorted({r["user"] for r in rows})
    series = {}
    for u in users:
        mine = [r for r in rows if r["user"] == u]
        mine.sort(key=lambda r: r["sweep_value"])
        series[u] = {
            "x": [r["sweep_value"] for r in mine],
            "loose": [r.get("loose_bound") for r in mine],
            "tight": [r.get("tight_bound") for r in mine],
            "mc": [r["mc_outage"] for r in mine],
            "se": [r["mc_se"] for r in mine],
        }
    return series


def _draw(series, highlight_users, xlabel, path):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    cmap = plt.get_cmap("viridis")
    users = sorted(series)
    for idx, u in enumerate(users):
        if highlight_users is not None and u not in highlight_users:
            continue
        color = cmap(idx / max(1, len(users) - 1))
        s = series[u]
        if all(v is not None for v in s["tight"]):
            ax.plot(s["x"], s["tight"], "-", color=color, lw=1.4,
                    label=f"user {u} bound")
            ax.plot(s["x"], s["loose"], "--", color=color, lw=1.0, alpha=0.7)
        ax.errorbar(s["x"], s["mc"], yerr=[3 * e for e in s["se"]], fmt="o",
                    color=color, ms=3.5, capsize=2, alpha=0.85)
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("outage probability")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7, ncol=2, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rate_sweep(rows, path, users=None):
    """Outage vs required rate; solid = tight bound, dashed = loose,
    markers = Monte Carlo with 3-sigma bars."""
    _draw(_by_user(rows), users, "required rate (bits/channel use)", path)


def plot_error_sweep(rows, path, swept_users=None):
    """Outage vs estimate-error power for the swept and unswept users."""
    _draw(_by_user(rows), None, "estimate error power xi2", path)
