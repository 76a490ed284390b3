"""Figures for density curves and flux solutions.

Figures are built on :class:`matplotlib.figure.Figure` directly, so nothing
touches pyplot's global state and no display is needed.
"""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["density_figure", "flux_figure", "save_figure"]


def _new_figure(width=6.0, height=4.0):
    fig = Figure(figsize=(width, height), layout="constrained")
    FigureCanvasAgg(fig)
    return fig


def density_figure(curve, reference=None, reference_label="reference", log_y=False):
    """Density curve with failed points marked and an optional reference curve.

    Parameters
    ----------
    curve : DensityCurve
    reference : array_like, optional
        Values on ``curve.x_grid`` drawn as a dashed line.
    log_y : bool
        Logarithmic density axis (non-positive values are dropped).
    """
    fig = _new_figure()
    ax = fig.add_subplot()
    x, u = curve.x_grid, curve.u
    ok = np.isfinite(u)
    ax.plot(x[ok], u[ok], lw=1.5, label=f"density, t = {curve.t:g}")
    if reference is not None:
        ax.plot(x, np.asarray(reference, dtype=float), ls="--", lw=1.0, label=reference_label)
    if (~ok).any():
        ax.plot(x[~ok], np.zeros((~ok).sum()), "x", color="tab:red", label="failed points")
    if log_y:
        ax.set_yscale("log")
    p = curve.params
    ax.set_title(f"a={p.a:g}, b={p.b:g}, c={p.c:g}, v={p.v:g}, mode {curve.mode}", fontsize=9)
    ax.set_xlabel("x")
    ax.set_ylabel("u(t, x)")
    ax.legend(fontsize=8)
    return fig


def flux_figure(flux):
    """Boundary flux at the grid nodes with the Volterra residual on a second axis."""
    fig = _new_figure()
    ax = fig.add_subplot()
    ax.plot(flux.grid, flux.values, marker=".", lw=1.0, label="f(t)")
    ax.set_xlabel("t")
    ax.set_ylabel("f(t)")
    res = np.abs(np.asarray(flux.residuals, dtype=float))
    if np.any(res > 0):
        twin = ax.twinx()
        twin.semilogy(flux.grid[res > 0], res[res > 0], ls=":", color="tab:gray",
                      label="|residual|")
        twin.set_ylabel("|residual|")
    ax.legend(fontsize=8, loc="upper left")
    return fig


def save_figure(fig, path, dpi=150):
    """Write ``fig`` to ``path``; the format follows the file extension."""
    fig.savefig(path, dpi=dpi)
    return path
