"""Figure rendering for the report path: PNGs written next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150
FIGSIZE = (6.4, 4.0)

plt.rcParams.update({
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "lines.linewidth": 1.6,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_value_table(table, path):
    """Value of sampling / not sampling / optimum across the belief grid."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    nodes = table.grid.nodes
    ax.plot(nodes, table.v_s, label="sample", color="tab:blue")
    ax.plot(nodes, table.v_ns, label="no sample", color="tab:orange")
    ax.plot(nodes, table.v, label="optimal", color="black", linestyle="--")
    ax.set_xlabel(r"belief $\pi$ = P(state 0)")
    ax.set_ylabel("discounted value")
    ax.set_title(f"eta2={table.eta2:g}, beta={table.beta:g}")
    ax.legend()
    return _save(fig, path)


def plot_threshold_curve(results, path):
    """Threshold belief against the passive subsidy."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    etas = [r.eta2 for r in results]
    pis = [r.pi_t for r in results]
    ax.plot(etas, pis, marker=".", color="tab:blue")
    approx = [r for r in results if r.regime == "ApproxThreshold"]
    if approx:
        ax.plot([r.eta2 for r in approx], [r.pi_t for r in approx],
                linestyle="none", marker="o", markerfacecolor="none",
                color="tab:red", label="approximate threshold")
        ax.legend()
    ax.set_xlabel(r"passive subsidy $\eta_2$")
    ax.set_ylabel(r"threshold belief $\pi_T$")
    return _save(fig, path)


def plot_whittle_table(table, path):
    """Index curve, with the numeric fallback entries marked."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(table.pis, table.values, color="tab:blue")
    numeric = np.array([m == "Bisection" for m in table.methods])
    if numeric.any() and not numeric.all():
        ax.plot(table.pis[numeric], table.values[numeric], linestyle="none",
                marker=".", color="tab:red", label="bisection")
        ax.legend()
    ax.set_xlabel(r"belief $\pi$")
    ax.set_ylabel("subsidy index")
    ax.set_title(f"beta={table.beta:g}")
    return _save(fig, path)


def plot_sim_stats(stats, path, window: int = 25):
    """Per-slot mean reward for each policy (light smoothing for legibility)."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    kernel = np.ones(window) / window
    for name in stats.policies:
        y = stats.slot_means[name]
        smooth = np.convolve(y, kernel, mode="valid")
        ax.plot(np.arange(smooth.size) + window // 2, smooth, label=name)
    ax.set_xlabel("slot")
    ax.set_ylabel(f"mean reward over {stats.iterations} runs")
    ax.legend()
    return _save(fig, path)
