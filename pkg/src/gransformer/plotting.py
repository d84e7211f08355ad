"""Static figures for evaluation reports.

SVG output is byte-stable for identical inputs: the hash salt used for
element ids is fixed and the date metadata is dropped.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "gransformer",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.0, 3.2),
}


def mean_histogram(hists) -> np.ndarray:
    hists = list(hists)
    if not hists:
        return np.zeros(1)
    size = max(len(h) for h in hists)
    out = np.zeros(size)
    for h in hists:
        out[: len(h)] += h
    return out / len(hists)


def histogram_bars(path, hist_a, hist_b, labels=("A", "B"), xlabel="", title="", bin_edges=None):
    """Side-by-side bar chart of two histograms, written as SVG."""
    size = max(len(hist_a), len(hist_b))
    a = np.zeros(size)
    b = np.zeros(size)
    a[: len(hist_a)] = hist_a
    b[: len(hist_b)] = hist_b
    x = np.arange(size) if bin_edges is None else np.asarray(bin_edges[:-1])
    width = 0.4 if bin_edges is None else 0.4 * float(bin_edges[1] - bin_edges[0])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(x - width / 2, a, width=width, label=labels[0], color="#4c72b0")
        ax.bar(x + width / 2, b, width=width, label=labels[1], color="#dd8452")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("fraction of nodes")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def nll_curves(path, traces: dict, title: str = "") -> None:
    """Training NLL per epoch for one or more runs."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, trace in traces.items():
            ep = [r[0] for r in trace]
            ax.plot(ep, [r[1] for r in trace], label=name, lw=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel("train NLL per graph")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
