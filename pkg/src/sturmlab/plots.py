"""Figures written next to the CSV/JSON reports.

matplotlib is optional (``pip install artifact[plot]``); it is imported only
when a figure is requested.  PNG metadata is stripped so repeated runs give
identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

TYPE_COLORS = {"I": "tab:blue", "II": "tab:orange", "III": "tab:green"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_band_tree(tree, path, window=None):
    """One row per generation; bands drawn as coloured bars by type.

    ``window`` restricts the energy axis, e.g. ``(-2, 2)``.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 0.45 * (tree.depth + 2) + 1))
    for g in tree.generations:
        for b in g:
            lo, hi = float(b.lo), float(b.hi)
            if window and (hi < window[0] or lo > window[1]):
                continue
            ax.plot([lo, hi], [g.order, g.order], lw=6, solid_capstyle="butt",
                    color=TYPE_COLORS[str(b.btype)])
    ax.invert_yaxis()
    ax.set_ylabel("generation k")
    ax.set_xlabel("E")
    if window:
        ax.set_xlim(*window)
    ax.set_title(f"lambda={tree.lam}, alpha=[{tree.cf.literal()}]")
    for t, c in TYPE_COLORS.items():
        ax.plot([], [], color=c, lw=6, label=f"type {t}")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_exponents(series: dict, path, title=""):
    """``series`` maps a label to a list of ``(k, s_k)`` pairs."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in series.items():
        pts = [(k, s) for k, s in pts if not math.isnan(s)]
        if pts:
            ks, ss = zip(*pts)
            ax.plot(ks, ss, "o-", label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("s_k")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_histogram(values: dict, path, bins=15, xlabel="tail min of s_k"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    allv = [v for vs in values.values() for v in vs if not math.isnan(v)]
    if allv:
        edges = np.linspace(min(allv), max(allv) + 1e-12, bins + 1)
        for label, vs in values.items():
            ax.hist([v for v in vs if not math.isnan(v)], bins=edges, alpha=0.5, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("frequencies")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_eigenvalues(eigs, cover, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 2.5))
    for lo, hi in cover:
        ax.axvspan(float(lo), float(hi), color="0.8")
    ax.plot(eigs, np.zeros_like(eigs), "|", color="k", ms=20)
    ax.set_yticks([])
    ax.set_xlabel("E")
    fig.tight_layout()
    return _save(fig, path)
