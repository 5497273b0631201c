"""Report figures written next to the CSV outputs (PNG, non-interactive backend)."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .brute import position_histograms  # noqa: E402

SLOT_COLORS = ("tab:blue", "tab:pink", "tab:green", "tab:orange", "tab:purple")

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    # no timestamps in the metadata so reruns give identical files
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_ga_traces(traces, path, optimum=None):
    """Best error per generation for one or more GA runs (infeasible generations omitted)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for label, trace in traces.items():
            y = np.asarray(trace, dtype=float)
            y[~np.isfinite(y)] = np.nan
            ax.plot(np.arange(y.size), y, marker="o", ms=3, label=label)
        if optimum is not None and math.isfinite(optimum):
            ax.axhline(optimum, color="k", ls="--", lw=0.8, label="exhaustive optimum")
        ax.set_xlabel("generation")
        ax.set_ylabel("best error")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_position_histograms(hist, path):
    """Stacked per-slot counts over window positions."""
    k, w = hist.shape
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(k, 1, figsize=(5.0, 1.2 * k + 0.6), sharex=True, squeeze=False)
        pos = np.arange(1, w + 1)
        for j, ax in enumerate(axes[:, 0]):
            ax.bar(pos, hist[j], color=SLOT_COLORS[j % len(SLOT_COLORS)], width=0.8)
            ax.set_ylabel(f"point {j + 1}")
        axes[-1, 0].set_xlabel("window position")
        return _save(fig, path)


def plot_scorecard(rows, path):
    """Error and misclassification per strategy as horizontal bars."""
    names = [r.strategy for r in rows]
    err = np.array([r.error for r in rows], dtype=float)
    mis = np.array([r.misclassification for r in rows], dtype=float)
    y = np.arange(len(rows))[::-1]
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(7.0, 3.2), sharey=True)
        a1.barh(y, np.where(np.isfinite(err), err, 0.0), color="tab:blue")
        a1.set_xscale("log")
        a1.set_xlabel("mean relative error")
        a1.set_yticks(y, names)
        a2.barh(y, np.where(np.isfinite(mis), mis, 0.0), color="tab:red")
        a2.set_xlabel("misclassification")
        a2.set_xlim(0, 1)
        return _save(fig, path)


def plot_library_modes(problem, path):
    """Modulus of every library mode with the sampling window shaded."""
    lib = problem.library
    x = problem.grid if problem.grid is not None else np.arange(1, lib.n + 1)
    w = np.asarray(problem.window) - 1
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        for r in lib.regime_ids:
            for j in range(lib.sublibraries[r].rank):
                ax.plot(x, np.abs(lib.sublibraries[r].modes[:, j]), lw=0.8,
                        label=f"{r} mode {j + 1}")
        ax.axvspan(x[w[0]], x[w[-1]], color="0.85", zorder=0)
        ax.set_xlabel("x")
        ax.set_ylabel("|mode|")
        ax.legend(frameon=False, ncol=2)
        return _save(fig, path)


def render_run(summary, out):
    """All figures for an end-to-end run directory."""
    written = []
    optimum = None
    if summary.brute is not None and summary.brute.best is not None:
        optimum = summary.brute.best.error
        hist = position_histograms(summary.brute.ranked, summary.problem.m,
                                   summary.problem.window)
        written.append(plot_position_histograms(hist, out / "brute_histograms.png"))
    if summary.ga:
        names = {"deim": "GA from DEIM", "deim1": "GA from DEIM+1"}
        traces = {names.get(k, k): res.trace for k, res in summary.ga.items()}
        written.append(plot_ga_traces(traces, out / "ga_trace.png", optimum))
    if summary.scorecard:
        written.append(plot_scorecard(summary.scorecard, out / "scorecard.png"))
    if summary.problem is not None:
        written.append(plot_library_modes(summary.problem, out / "library_modes.png"))
    return written
