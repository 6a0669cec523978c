"""Matplotlib figures for stylization runs, rendered straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .image import Image  # noqa: E402

FIG_DPI = 100
# fixed metadata keeps repeated renders byte-identical
_PNG_METADATA = {"Software": None}


def _show(ax, img: Image, title: str):
    data = img.data
    if img.channels == 1:
        ax.imshow(data[:, :, 0], cmap="gray", vmin=0, vmax=1)
    else:
        ax.imshow(data)
    ax.set_title(title, fontsize=9)
    ax.axis("off")


def plot_traces(ax, traces, level_sizes=None):
    """Objective and MI against cumulative evaluation count, one color per level."""
    offset = 0
    for lvl, trace in enumerate(traces):
        if not trace:
            continue
        x = offset + np.arange(len(trace))
        label = f"level {lvl}"
        if level_sizes:
            label += " ({}x{})".format(*level_sizes[lvl])
        ax.plot(x, [t.objective for t in trace], color=f"C{lvl}", lw=1.2, label=label)
        ax.plot(x, [-t.mi for t in trace], color=f"C{lvl}", lw=0.8, ls="--")
        offset += len(trace)
    ax.set_xlabel("objective evaluations")
    ax.set_ylabel("objective (solid), -MI (dashed)")
    if offset:
        ax.legend(fontsize=7, frameon=False)


def stylize_figure(content: Image, style: Image, output: Image, traces, level_sizes=None):
    fig, axes = plt.subplots(1, 4, figsize=(13, 3.4), gridspec_kw={"width_ratios": [1, 1, 1, 1.3]})
    _show(axes[0], content, "content")
    _show(axes[1], style, "style")
    _show(axes[2], output, "output")
    plot_traces(axes[3], traces, level_sizes)
    fig.tight_layout()
    return fig


def save_stylize_figure(path, content, style, output, traces, level_sizes=None) -> None:
    fig = stylize_figure(content, style, output, traces, level_sizes)
    try:
        fig.savefig(path, dpi=FIG_DPI, metadata=_PNG_METADATA if str(path).lower().endswith(".png") else None)
    finally:
        plt.close(fig)
