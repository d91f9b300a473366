"""Figures written to files with the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_stress_curve(rows, path, *, title=None, threshold=None):
    """Reliability and both AED values against ``mu``; MDPDE region shaded."""
    mu = np.array([r["mu"] for r in rows])
    fig, (ax_r, ax_a) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax_r.plot(mu, [r["reliability"] for r in rows], color="k")
    ax_r.axhline(0.19, ls=":", color="0.5")
    ax_r.axhline(0.81, ls=":", color="0.5")
    ax_r.set_ylabel("reliability")
    ax_a.plot(mu, [r["aed_closed"] for r in rows], label="closed form")
    ax_a.plot(mu, [r["aed_generic"] for r in rows], ls="--", label="generic formula")
    ax_a.axhline(0.0, color="0.6", lw=0.8)
    ax_a.set_xlabel(r"$\mu$")
    ax_a.set_ylabel("AED")
    ax_a.legend(frameon=False)
    if threshold is not None:
        for ax in (ax_r, ax_a):
            ax.axvspan(-threshold, threshold, color="C2", alpha=0.1, lw=0)
    if title:
        ax_r.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_risk_fit(data, fit, path, *, title=None):
    """``n R(n)`` with the fitted ``a + b/n`` line."""
    n = np.array([d[0] for d in data], dtype=float)
    risk = np.array([d[1] for d in data], dtype=float)
    grid = np.linspace(n.min(), n.max(), 200)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(n, n * risk, "o", color="k", label="data")
    ax.plot(grid, fit.a + fit.b / grid, label=f"a={fit.a:.4g}, b={fit.b:.4g}")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("n R(n)")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
