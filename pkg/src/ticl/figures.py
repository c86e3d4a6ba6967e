"""Figure rendering for the CLI report paths.

The library proper emits delimited text only; everything visual lives here
so a headless pipeline can skip it entirely. All functions write a PNG and
return the path they wrote.
"""
from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .retrieval import Histogram

_DPI = 130


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def loss_curve(trace, path):
    """Mean loss per epoch on a log scale, with the lr steps marked."""
    epochs = [t.epoch for t in trace]
    losses = [t.mean_loss for t in trace]
    lrs = [t.lr for t in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, marker="o", lw=1.5)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax2 = ax.twinx()
    ax2.step(epochs, lrs, where="post", color="tab:gray", alpha=0.5, lw=1.0)
    ax2.set_yscale("log")
    ax2.set_ylabel("learning rate", color="tab:gray")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def confusion_heatmap(matrix: np.ndarray, path):
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix, cmap="viridis", interpolation="nearest")
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    fig.colorbar(im, ax=ax, label="count")
    return _finish(fig, path)


def recall_curve(recall_at_k: dict, path):
    ks = sorted(recall_at_k)
    vals = [recall_at_k[k] for k in ks]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, vals, marker="o")
    ax.set_xscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel("recall@k")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def histogram_bars(hist: Histogram, path, xlabel: str, log_x: bool = False):
    """Bar chart of a binned error distribution; the open top bin is widened
    visually to twice the previous bin."""
    edges = np.asarray(hist.edges, dtype=np.float64)
    counts = np.asarray(hist.counts, dtype=np.float64)
    finite_edges = edges.copy()
    if np.isinf(finite_edges[-1]):
        prev_w = finite_edges[-2] - finite_edges[-3] if len(finite_edges) > 2 else 1.0
        finite_edges[-1] = finite_edges[-2] + 2.0 * prev_w
    widths = np.diff(finite_edges)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(finite_edges[:-1], counts, width=widths, align="edge",
           edgecolor="black", lw=0.5)
    if log_x:
        # log axes cannot start at zero; nudge to the first positive edge
        positive = finite_edges[finite_edges > 0]
        if positive.size:
            ax.set_xscale("log")
            ax.set_xlim(left=positive[0] * 0.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    return _finish(fig, path)


def brightness_bars(rows: Sequence, path):
    """Mean brightness by hour with one-std error bars; empty hours are
    left blank rather than drawn at zero."""
    hours = [r[0] for r in rows if r[1] > 0]
    means = [r[2] for r in rows if r[1] > 0]
    stds = [r[3] for r in rows if r[1] > 0]
    fig, ax = plt.subplots(figsize=(7, 4))
    if hours:
        ax.errorbar(hours, means, yerr=stds, fmt="o-", capsize=3)
    ax.set_xlabel("hour of day")
    ax.set_ylabel("mean brightness")
    ax.set_xlim(-0.5, 23.5)
    ax.set_xticks(range(0, 24, 2))
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)
