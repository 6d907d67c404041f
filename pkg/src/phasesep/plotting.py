"""Static SVG output for trajectories and grid summaries."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "phasesep"


def line_svg(series, path, xlabel: str = "", ylabel: str = "") -> None:
    """Write a single line plot of ``(x, y)`` pairs; the file is reproducible."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if series:
        xs, ys = zip(*series)
        ax.plot(xs, ys, marker=".", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
