"""SVG figures: similarity matrices and space-time label timelines."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_matrix", "plot_timeline"]

# stable element ids and no timestamp, so reruns give the same file
_RC = {"svg.hashsalt": "actiongroup", "svg.fonttype": "none"}


def _save(fig, path, description: str = ""):
    meta = {"Date": None}
    if description:
        meta["Description"] = description
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def plot_matrix(M, labels, path, title: str = "", vmin: float = 0.0, vmax: float = 1.0,
                description: str = ""):
    """Heat map of a square person-by-person matrix with values annotated.

    ``description`` is stored in the SVG metadata.
    """
    M = np.asarray(M, dtype=float)
    n = len(labels)
    size = 1.2 + 0.6 * n
    fig, ax = plt.subplots(figsize=(size + 1.0, size))
    im = ax.imshow(M, cmap="viridis", vmin=vmin, vmax=vmax)
    ax.set_xticks(range(n), [str(v) for v in labels])
    ax.set_yticks(range(n), [str(v) for v in labels])
    ax.set_xlabel("person")
    ax.set_ylabel("person")
    if n <= 12:
        for i in range(n):
            for j in range(n):
                ax.text(j, i, f"{M[i, j]:.2f}", ha="center", va="center",
                        color="w" if M[i, j] < 0.5 * (vmin + vmax) else "k", fontsize=8)
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    _save(fig, path, description)


def plot_timeline(entities, path, title: str = "", description: str = ""):
    """One row per person, one cell per interval, colored by cluster label.

    ``entities`` is a sequence of ``{"person", "interval", "label"}`` dicts;
    cells without an entity stay blank.  ``description`` is stored in the
    SVG metadata.
    """
    persons = sorted({e["person"] for e in entities})
    intervals = sorted({e["interval"] for e in entities})
    grid = np.full((len(persons), len(intervals)), np.nan)
    row = {p: i for i, p in enumerate(persons)}
    col = {t: i for i, t in enumerate(intervals)}
    for e in entities:
        grid[row[e["person"]], col[e["interval"]]] = e["label"]
    n_labels = int(np.nanmax(grid)) if np.isfinite(grid).any() else 1
    cmap = plt.get_cmap("tab10", max(n_labels, 1))
    fig, ax = plt.subplots(figsize=(1.5 + 0.45 * len(intervals), 1.0 + 0.45 * len(persons)))
    ax.imshow(np.ma.masked_invalid(grid), cmap=cmap, vmin=0.5, vmax=n_labels + 0.5,
              aspect="auto", interpolation="nearest")
    for (i, j), v in np.ndenumerate(grid):
        if np.isfinite(v):
            ax.text(j, i, str(int(v)), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(intervals)), [str(t) for t in intervals])
    ax.set_yticks(range(len(persons)), [str(p) for p in persons])
    ax.set_xlabel("interval")
    ax.set_ylabel("person")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path, description)
