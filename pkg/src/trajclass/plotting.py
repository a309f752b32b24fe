"""
Static figures written next to the delimited reports.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from .labels import LABEL_COLORS, Label  # noqa: E402


def plot_classification_map(trajectories, decisions, path, title="", figsize=(6, 6), linewidth=0.8):
    """Draw each track as a polyline in the colour of its class.

    ``decisions`` maps track id to a :class:`Label`; tracks without a
    decision are drawn in grey. The format follows the file suffix (SVG for
    vector output).
    """
    fig, ax = plt.subplots(figsize=figsize)
    segs, colors, seen = [], [], set()
    for t in trajectories:
        label = decisions.get(t.track_id)
        colors.append(LABEL_COLORS[Label(label)] if label is not None else "0.6")
        segs.append(t.positions)
        if label is not None:
            seen.add(Label(label))
    if segs:
        ax.add_collection(LineCollection(segs, colors=colors, linewidths=linewidth))
        ax.autoscale()
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    handles = [Line2D([0], [0], color=LABEL_COLORS[l], label=l.value) for l in Label if l in seen]
    if handles:
        ax.legend(handles=handles, loc="best", fontsize="small", frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
