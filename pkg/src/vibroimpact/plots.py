"""Figure rendering for the CLI report paths.

Each helper draws one figure from already-computed data and saves it next
to the delimited output; nothing here feeds back into the computations.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_trajectory", "plot_family", "plot_surface_fit", "plot_manifold"]

_SAVEKW = dict(dpi=150, bbox_inches="tight")


def plot_trajectory(times, states, events, path):
    states = np.asarray(states)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(times, states[:, 0], "k-", lw=0.8)
    for t, kind in events:
        ax1.axvline(t, color="r" if kind == "reflection" else "orange", lw=0.5, alpha=0.6)
    ax1.axhline(0.0, color="0.6", lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("x1")
    ax2.plot(states[:, 0], states[:, 1], "k-", lw=0.7)
    ax2.axvline(0.0, color="0.6", lw=0.8)
    ax2.set_xlabel("x1")
    ax2.set_ylabel("y1")
    fig.tight_layout()
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)


def plot_family(mus, Y0s, path, mu_star=None):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.plot(mus, Y0s, "k.-", ms=3, lw=0.7)
    if mu_star is not None:
        ax.axvline(mu_star, color="r", lw=0.7, ls="--")
    ax.set_xlabel("mu")
    ax.set_ylabel("impact speed Y0")
    fig.tight_layout()
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)


def plot_surface_fit(samples, exponent, coefficient, path):
    ys = np.array([abs(y) for y, g in samples if y != 0.0 and g > 0])
    gs = np.array([g for y, g in samples if y != 0.0 and g > 0])
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(ys, gs, "ko", ms=4, label="samples")
    yy = np.geomspace(ys.min(), ys.max(), 50)
    ax.loglog(yy, coefficient * yy ** exponent, "r-", lw=0.8,
              label=f"fit: {coefficient:.3g} |y1|^{exponent:.3f}")
    ax.set_xlabel("|y1|")
    ax.set_ylabel("separatrix height")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)


def plot_manifold(polyline, path, fixed_point=None):
    P = polyline.points
    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    ax.plot(P[:, 0], P[:, 1], "-", color="0.3", lw=0.6)
    if polyline.separatrix_crossings:
        idx = list(polyline.separatrix_crossings)
        ax.plot(P[idx, 0], P[idx, 1], "rx", ms=6, label="separatrix crossing")
    if polyline.kink_indices:
        idx = list(polyline.kink_indices)
        ax.plot(P[idx, 0], P[idx, 1], "b+", ms=6, label="kink")
    if fixed_point is not None:
        ax.plot([fixed_point[0]], [fixed_point[1]], "g*", ms=9, label="fixed point")
    ax.axvline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("x1")
    ax.set_ylabel("y1")
    if polyline.separatrix_crossings or polyline.kink_indices or fixed_point is not None:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)
