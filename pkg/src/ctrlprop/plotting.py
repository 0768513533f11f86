"""Figures for benchmark reports."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COUNTER_STYLE = {
    "queries": ("queries evaluated", "o-"),
    "activations": ("propagator activations", "s--"),
    "created": ("constraints created", "^:"),
}


def figure_size(width=7.0):
    golden_ratio = (math.sqrt(5) - 1.0) / 2.0
    return width, width * golden_ratio


def plot_ratios(summary, path, counters=("queries", "activations", "created")):
    """Plot controlled/uncontrolled counter ratios against tuple length.

    One panel per constraint; the dashed line at 1.0 is parity with the
    uncontrolled baseline.  Returns the saved path.
    """
    by_constraint = {}
    for row in summary:
        by_constraint.setdefault(row["constraint"], []).append(row)
    names = sorted(by_constraint)
    if not names:
        raise ValueError("nothing to plot")
    fig, axes = plt.subplots(1, len(names), figsize=figure_size(3.2 * len(names) + 1), squeeze=False)
    for ax, name in zip(axes[0], names):
        rows = sorted(by_constraint[name], key=lambda r: r["n"])
        ns = [r["n"] for r in rows]
        for counter in counters:
            label, style = COUNTER_STYLE.get(counter, (counter, "x-"))
            ax.plot(ns, [100.0 * r[f"{counter}_ratio"] for r in rows], style, label=label)
        ax.axhline(100.0, color="0.6", lw=0.8, ls="--")
        ax.set_title(name)
        ax.set_xlabel("variables per tuple")
        if len(ns) > 1 and max(ns) / max(min(ns), 1) >= 8:
            ax.set_xscale("log")
            ax.set_xticks(ns)
            ax.set_xticklabels([str(n) for n in ns])
        ax.set_ylim(bottom=0)
    axes[0][0].set_ylabel("controlled / uncontrolled (%)")
    axes[0][-1].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
