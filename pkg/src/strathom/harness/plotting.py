"""Matplotlib figures for reports and solutions (non-interactive backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5) - 1.0) / 2.0
FIG_WIDTH = 5.0

PARAMS = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "mathtext.fontset": "stix",
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.figsize": (FIG_WIDTH, FIG_WIDTH * GOLDEN),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def newfig():
    plt.rcParams.update(PARAMS)
    fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    # no timestamps in the PNG metadata
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def convergence_figure(report, path):
    """L¹ and L² errors against ε on log-log axes, one line per resolution."""
    fig, ax = newfig()
    resolutions = sorted({r.get("resolution") for r in report.rows})
    for res in resolutions:
        eps = report.column("eps", res)
        for key, marker in (("l1_error", "o"), ("l2_error", "s")):
            err = report.column(key, res)
            ok = np.isfinite(err) & (err > 0)
            label = key.replace("_error", "") + (f" (res {res})" if res else "")
            ax.loglog(eps[ok], err[ok], marker=marker, label=label)
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$\|u_\varepsilon - u\|$")
    ax.set_title(f"{report.name}: fine-scale vs effective")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _save(fig, path)


def common_atom_figure(report, path):
    """Inter-family distance and Cauchy increments against ε."""
    fig, ax = newfig()
    eps = report.column("eps")
    for key, marker in (("distance", "o"), ("cauchy_a", "^"), ("cauchy_b", "v")):
        v = report.column(key)
        ok = np.isfinite(v) & (v > 0)
        ax.loglog(eps[ok], v[ok], marker=marker, label=key.replace("_", " "))
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$L^1$ distance")
    ax.set_title(f"{report.name}: two families with equal limit measures")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _save(fig, path)


def profile_figure(solutions, path, labels=None, samples=801):
    """1D solutions (or the x₂ mid-line of 2D ones) along x₁."""
    fig, ax = newfig()
    for k, sol in enumerate(solutions):
        grid = getattr(sol, "grid", None)
        L = grid.length if grid is not None else sol.length
        x = np.linspace(0.0, L, samples)
        if grid is not None and grid.d > 1:
            pts = np.column_stack([x] + [np.full_like(x, 0.5 * H) for H in grid.extents])
        else:
            pts = x[:, None]
        y = np.asarray(sol.evaluate(pts))[:, 0]
        ax.plot(x, y, label=None if labels is None else labels[k])
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$u_1$")
    if labels is not None:
        ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def _label(key):
    res = f" (res {key[1]})" if key[1] else ""
    if key[0] == "eff":
        return "effective" + res
    return f"$\\varepsilon$ = {key[2]:g}" + res


def report_figures(report, out_dir, solutions=None):
    """All figures for a report; returns the written paths."""
    fig_dir = os.path.join(out_dir, "figures")
    paths = []
    if report.kind == "common-atom":
        paths.append(common_atom_figure(report, os.path.join(fig_dir, f"{report.name}_distance.png")))
    else:
        paths.append(convergence_figure(report, os.path.join(fig_dir, f"{report.name}_convergence.png")))
    if solutions:
        keys = sorted(solutions, key=str)
        sols = [solutions[k] for k in keys]
        paths.append(profile_figure(sols, os.path.join(fig_dir, f"{report.name}_profiles.png"),
                                    labels=[_label(k) for k in keys]))
    return paths
