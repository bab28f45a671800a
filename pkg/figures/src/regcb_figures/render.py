"""The three figure kinds, each a pure function of one results directory.

All statistics come from the input files; in particular the width figure's
fitted slope is read from slope.csv so this package can never disagree with
the diagnostics that produced it.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .csvio import FigureInputError, floats, read_columns

PANEL_SIZE = (6.0, 4.0)
DPI = 150


def render_performance(in_dir: str):
    """Holdout validation reward against rounds, log-scaled x axis.

    Prefers a sweep root (best_series.csv plus the optional
    envelope_series.csv) and falls back to a single run's validation.csv.
    """
    best_path = os.path.join(in_dir, "best_series.csv")
    single_path = os.path.join(in_dir, "validation.csv")
    curves = []
    if os.path.exists(best_path):
        cols = read_columns(best_path, ("t", "mean_reward"))
        curves.append((floats(cols["t"]), floats(cols["mean_reward"]), "best parameter", "-"))
        envelope_path = os.path.join(in_dir, "envelope_series.csv")
        if os.path.exists(envelope_path):
            cols = read_columns(envelope_path, ("t", "max_mean_reward"))
            curves.append(
                (floats(cols["t"]), floats(cols["max_mean_reward"]), "per-round envelope", "--")
            )
    elif os.path.exists(single_path):
        cols = read_columns(single_path, ("t", "reward"))
        curves.append((floats(cols["t"]), floats(cols["reward"]), "validation", "-"))
    else:
        raise FigureInputError(
            f"{in_dir}: performance needs best_series.csv or validation.csv"
        )

    fig, ax = plt.subplots(figsize=PANEL_SIZE)
    for t, values, label, style in curves:
        ax.plot(t, values, style, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("holdout reward")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def render_cdf(in_dir: str):
    """Per-algorithm count of datasets at or below each normalized loss.

    The y axis spans the full dataset count (from losses.csv) so curves for
    different algorithms stay directly comparable.
    """
    losses = read_columns(
        os.path.join(in_dir, "losses.csv"), ("algorithm", "dataset", "loss")
    )
    cdf = read_columns(os.path.join(in_dir, "cdf.csv"), ("algorithm", "x", "count"))
    n_datasets = len(set(losses["dataset"]))

    fig, ax = plt.subplots(figsize=PANEL_SIZE)
    for algo in sorted(set(cdf["algorithm"])):
        xs = [float(x) for a, x in zip(cdf["algorithm"], cdf["x"]) if a == algo]
        counts = [float(c) for a, c in zip(cdf["algorithm"], cdf["count"]) if a == algo]
        ax.step(xs, counts, where="post", label=algo)
    ax.set_ylim(0, n_datasets)
    ax.set_xlabel("normalized loss")
    ax.set_ylabel("datasets at or below")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def render_width(in_dir: str):
    """Chosen-action width on log-log axes with the fitted slope overlaid.

    Reads width_series.csv and slope.csv from a diagnostics directory; when
    disagreement_series.csv is present a second panel shows the plausible
    action count over rounds.
    """
    width_cols = read_columns(
        os.path.join(in_dir, "width_series.csv"), ("t", "width", "smoothed")
    )
    slope_cols = read_columns(
        os.path.join(in_dir, "slope.csv"),
        ("series", "slope", "intercept", "n_used", "n_dropped"),
    )
    if "width" not in slope_cols["series"]:
        raise FigureInputError(
            f"{in_dir}: slope.csv has no row for the width series"
        )
    row = slope_cols["series"].index("width")
    slope = float(slope_cols["slope"][row])
    intercept = float(slope_cols["intercept"][row])

    dis_path = os.path.join(in_dir, "disagreement_series.csv")
    dis_cols = (
        read_columns(dis_path, ("t", "size", "smoothed"))
        if os.path.exists(dis_path)
        else None
    )

    n_panels = 2 if dis_cols is not None else 1
    fig, axes = plt.subplots(
        1, n_panels, figsize=(PANEL_SIZE[0] * n_panels, PANEL_SIZE[1])
    )
    width_ax = axes[0] if n_panels == 2 else axes

    t = floats(width_cols["t"])
    width_ax.plot(t, floats(width_cols["width"]), alpha=0.3, label="width")
    width_ax.plot(t, floats(width_cols["smoothed"]), label="smoothed")
    fit_line = [math.exp(intercept) * ti**slope for ti in t]
    width_ax.plot(t, fit_line, color="black", label=f"fit slope={slope:.3f}")
    width_ax.set_xscale("log")
    width_ax.set_yscale("log")
    width_ax.set_xlabel("round")
    width_ax.set_ylabel("chosen-action width")
    width_ax.legend(loc="lower left")

    if dis_cols is not None:
        dis_ax = axes[1]
        dt = floats(dis_cols["t"])
        dis_ax.plot(dt, floats(dis_cols["size"]), alpha=0.3, label="size")
        dis_ax.plot(dt, floats(dis_cols["smoothed"]), label="smoothed")
        dis_ax.set_xscale("log")
        dis_ax.set_xlabel("round")
        dis_ax.set_ylabel("plausible actions")
        dis_ax.legend(loc="upper right")

    fig.tight_layout()
    return fig


RENDERERS = {
    "performance": render_performance,
    "cdf": render_cdf,
    "width": render_width,
}
KINDS = tuple(sorted(RENDERERS))


def render(kind: str, in_dir: str, out_path: str):
    """Render one figure kind from `in_dir`, write `out_path`, return the figure."""
    if kind not in RENDERERS:
        raise FigureInputError(
            f"unknown figure kind {kind!r}; valid kinds: {sorted(RENDERERS)}"
        )
    fig = RENDERERS[kind](in_dir)
    fig.savefig(out_path, dpi=DPI)
    return fig
