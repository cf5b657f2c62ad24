"""Matplotlib figure rendering for the CLI report paths.

Figures are rendered headless (Agg) and written next to the delimited or
JSON output when a command is given a --figure path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .loops import BasedLoop, Loop, based_segments

FIG_SIZE = (6.4, 4.0)


def _step_series(l: Loop | BasedLoop):
    if isinstance(l, BasedLoop):
        segs = based_segments(l)
    else:
        segs = [(seg.state, seg.hold) for seg in l.word]
    times = [0.0]
    for _, hold in segs:
        times.append(times[-1] + hold)
    return segs, times


def plot_loop(ax, l: Loop | BasedLoop, label: str | None = None, offset: float = 0.0):
    segs, times = _step_series(l)
    space = l.space if isinstance(l, BasedLoop) else l.space
    if space.kind == "finite":
        order = {s: i for i, s in enumerate(space.labels)}
        ys = [order[s] for s, _ in segs]
        for k, y in enumerate(ys):
            ax.hlines(y + offset, times[k], times[k + 1],
                      colors="C0" if offset == 0.0 else "C1", lw=2)
        ax.set_yticks(range(len(space.labels)))
        ax.set_yticklabels(space.labels)
        ax.set_ylabel("state")
    else:
        for axis in range(space.dim):
            xs, ys = [], []
            for k, (s, _) in enumerate(segs):
                xs += [times[k], times[k + 1]]
                ys += [s[axis], s[axis]]
            ax.plot(xs, ys, lw=1.5, label=f"coord {axis}")
        ax.legend(fontsize=8)
        ax.set_ylabel("coordinate")
    ax.set_xlabel("time")
    if label:
        ax.set_title(label)


def figure_loop(l: Loop | BasedLoop, title: str = "loop"):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    plot_loop(ax, l, label=title)
    fig.tight_layout()
    return fig


def figure_alignment(lam_points, a_bounds, b_bounds, title: str = "alignment"):
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    for v in a_bounds:
        ax.axhline(v, color="0.85", lw=0.6)
    for u in b_bounds:
        ax.axvline(u, color="0.85", lw=0.6)
    us = [p[0] for p in lam_points]
    vs = [p[1] for p in lam_points]
    ax.plot([0, 1], [0, 1], ls="--", color="0.6", lw=0.8)
    ax.plot(us, vs, marker="o", ms=3, color="C0")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("second loop time")
    ax.set_ylabel("first loop time")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def figure_convergence(rows, title: str = "discretization ladder"):
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    eps = [r.epsilon for r in rows]
    offs = [r.offset if r.offset is not None else float("nan") for r in rows]
    sups = [r.sup_distance if r.sup_distance is not None else float("nan") for r in rows]
    axes[0].plot(eps, offs, marker="o")
    axes[0].set_ylabel("recovered offset")
    axes[1].plot(eps, sups, marker="s", color="C1")
    axes[1].set_ylabel("sup distance")
    axes[1].set_xlabel("epsilon")
    for ax in axes:
        ax.set_xscale("log")
        ax.invert_xaxis()
    axes[0].set_title(title)
    fig.tight_layout()
    return fig


def figure_probe(hs, values, title: str = "translation continuity"):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.loglog(hs, values, marker="o")
    ax.set_xlabel("shift h")
    ax.set_ylabel("based distance")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def figure_histogram(histogram: dict, title: str = "shortest separating length"):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    keys = sorted(histogram)
    ax.bar([str(k) for k in keys], [histogram[k] for k in keys], color="C0")
    ax.set_xlabel("pattern length")
    ax.set_ylabel("pairs")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def save_figure(fig, path: str):
    fig.savefig(path, dpi=150)
    plt.close(fig)
