"""Deterministic figure rendering for solved surfaces and boundaries.

All functions draw from plain arrays so they work both on freshly solved
objects and on artifacts read back from disk. Output is SVG with a fixed
hash salt and no date metadata: rerunning a command reproduces each file
byte for byte on the same installation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "stopctrl"
matplotlib.rcParams["svg.fonttype"] = "none"

_REGION_CMAP = ListedColormap(["#b8cfe8", "#f4f0e8", "#e8b8b8"])


def save_figure(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _overlay_boundaries(ax, bnd) -> None:
    t = np.asarray(bnd["t"])
    for key, mask_key, color, label in (("a", "a_defined", "#1f3d7a", "stop boundary"),
                                        ("b", "b_defined", "#7a1f1f", "action boundary")):
        vals = np.asarray(bnd[key], dtype=float).copy()
        mask = np.asarray(bnd[mask_key], dtype=bool)
        vals[~mask] = np.nan
        ax.plot(t, vals, color=color, lw=1.6, label=label)


def plot_value_heatmap(t, x, v, region, bnd, path) -> None:
    """Value surface over (t, x) with region shading and boundary overlays."""
    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    extent = (float(t[0]), float(t[-1]), float(x[0]), float(x[-1]))
    ax.imshow(np.asarray(region).T, origin="lower", extent=extent,
              aspect="auto", cmap=_REGION_CMAP, vmin=-0.5, vmax=2.5,
              interpolation="nearest", alpha=0.55)
    cs = ax.contour(t, x, np.asarray(v).T, levels=12, colors="#333333",
                    linewidths=0.6)
    ax.clabel(cs, inline=True, fontsize=6, fmt="%.2f")
    if bnd is not None:
        _overlay_boundaries(ax, bnd)
        ax.legend(loc="upper left", fontsize=8)
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.set_title("value surface with stop / continue / action regions")
    fig.tight_layout()
    save_figure(fig, path)


def plot_boundaries(bnd, path) -> None:
    fig, ax = plt.subplots(figsize=(7.2, 4.0))
    _overlay_boundaries(ax, bnd)
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.set_title("free boundaries")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, lw=0.3, alpha=0.5)
    fig.tight_layout()
    save_figure(fig, path)


def plot_convergence(entries, path) -> None:
    """Defect-versus-refinement curves for every multi-level check."""
    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    drew = False
    floor = 1e-300
    for e in entries:
        defects = e.get("defects") or []
        if len(defects) < 2:
            continue
        ys = np.maximum(np.asarray(defects, dtype=float), floor)
        ax.semilogy(range(len(ys)), ys, marker="o", ms=3, lw=1.0,
                    label=e["name"])
        drew = True
    if not drew:
        ax.text(0.5, 0.5, "no multi-level checks in this report",
                ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("refinement level (each halves dx and dt)")
    ax.set_ylabel("defect")
    ax.set_title("regularity defects under refinement")
    if drew:
        ax.legend(loc="best", fontsize=6)
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    fig.tight_layout()
    save_figure(fig, path)
