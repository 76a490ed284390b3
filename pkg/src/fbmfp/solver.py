"""Density curves ``u(t, x; xi)`` recovered from the Laplace-domain solution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DomainError, FbmFpError
from .flux import boundary_exponent, boundary_limit, solve_flux
from .inversion import InversionConfig, invert_many
from .laplace_domain import DEFAULT_TOLERANCE, InitialDistribution, omega_values
from .params import FpkParams

__all__ = [
    "MODES",
    "DensityCurve",
    "default_grid",
    "density_curve",
    "distribution_function",
    "moment_check",
    "expected_mean",
]

MODES = ("reflecting", "lemma2-flux")
DEFAULT_POINTS = 256
DEFAULT_FLUX_CELLS = 128
# contour error thresholds as fractions of the peak: flagged above the first, failed above the second
LOW_ACCURACY_FRACTION = 1e-6
FAIL_FRACTION = 1e-4


@dataclass(frozen=True)
class DensityCurve:
    """Recovered density on an x-grid.

    Failed points hold ``nan`` in ``u`` with the reason in ``failures``. A point
    fails when its contour error estimate exceeds ``FAIL_FRACTION`` of the peak
    and carries the ``low-accuracy`` flag above ``LOW_ACCURACY_FRACTION``.
    ``diagnostics`` carries ``normalization`` (head mass below the grid plus
    the trapezoid integral), ``tail_mass``, ``min_value``, ``peak``,
    ``max_discrepancy`` and, in reflecting mode, the boundary quantities.
    """

    t: float
    x_grid: np.ndarray
    u: np.ndarray
    xi: float | None
    mode: str
    params: FpkParams
    discrepancy: np.ndarray
    flags: tuple
    method_values: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.x_grid) <= 0):
            raise DomainError("x_grid must be strictly increasing")


def expected_mean(t, xi, params: FpkParams):
    """First moment ``xi e^{bt} + (c/b)(e^{bt} - 1)``, or ``xi + c t`` at b = 0."""
    return params.mean(t, xi)


def default_grid(t, init: InitialDistribution, params: FpkParams, n=DEFAULT_POINTS):
    """Geometric grid over ``[xi/50, 8 max(xi, E(t))]``."""
    xi = init.xi if init.xi is not None else 1.0
    upper = 8.0 * max(xi, expected_mean(t, xi, params))
    return np.geomspace(xi / 50.0, upper, n)


def _resolve_flux(t, init, params, mode, flux_cells):
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    if mode == "reflecting":
        return None
    return solve_flux(np.linspace(0.0, t, flux_cells + 1), init, params)


def _invert_with_fallback(transform, xs, inv):
    """Batch inversion; on failure retry point by point so failures stay local."""
    try:
        return invert_many(transform, xs, inv), {}
    except FbmFpError:
        pass
    results, failures = [], {}
    for i, x in enumerate(xs):
        try:
            results.append(invert_many(transform, np.array([x]), inv)[0])
        except FbmFpError as exc:
            results.append(None)
            failures[i] = f"{type(exc).__name__}: {exc}"
    return results, failures


def distribution_function(t, x, init: InitialDistribution, params: FpkParams, flux=None,
                          inv: InversionConfig = InversionConfig(), tol=DEFAULT_TOLERANCE):
    """``P(X_t <= x)`` (mass on ``[0, x]``) by inverting ``omega(t, s) / s``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))

    def transform(s):
        return omega_values(t, s, init, params, flux=flux, tol=tol) / s

    res = invert_many(transform, xs, inv)
    out = np.array([r.value for r in res])
    return float(out[0]) if np.ndim(x) == 0 else out


def _boundary_fit(x, u, beta, n_fit=6):
    """Extrapolate ``Gamma(beta) x^(1-beta) u`` to x = 0 by a quadratic fit."""
    ok = np.isfinite(u)
    x, u = x[ok][:n_fit], u[ok][:n_fit]
    if len(x) < 3 or beta <= 0:
        return math.nan
    y = gamma_fn(beta) * x ** (1.0 - beta) * u
    return float(np.polyval(np.polyfit(x, y, 2), 0.0))


def density_curve(t, x_grid=None, init: InitialDistribution | None = None, mode="reflecting",
                  params: FpkParams | None = None, inv: InversionConfig = InversionConfig(),
                  tol=DEFAULT_TOLERANCE, flux_cells=DEFAULT_FLUX_CELLS):
    """Invert the transform over ``x_grid`` and collect diagnostics.

    Parameters
    ----------
    x_grid : array_like or None
        Strictly increasing positive points; ``None`` selects :func:`default_grid`.
    mode : {'reflecting', 'lemma2-flux'}
        ``'lemma2-flux'`` first solves for the boundary flux on ``flux_cells`` cells.
    tol : float
        Absolute tolerance of the characteristic quadrature.
    """
    if params is None or init is None:
        raise DomainError("params and init are required")
    if not t > 0:
        raise DomainError("t must be positive")
    x = default_grid(t, init, params) if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or len(x) == 0 or np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise DomainError("x_grid must be positive and strictly increasing")
    flux = _resolve_flux(t, init, params, mode, flux_cells)

    def transform(s):
        return omega_values(t, s, init, params, flux=flux, tol=tol)

    results, failures = _invert_with_fallback(transform, x, inv)
    n = len(x)
    u = np.full(n, np.nan)
    disc = np.full(n, np.nan)
    flags = [()] * n
    method_values = {m: np.full(n, np.nan) for m in inv.methods()}
    error = np.zeros(n)
    for i, r in enumerate(results):
        if r is None:
            flags[i] = ("failed",)
            continue
        if not np.isfinite(r.value):
            failures[i] = "non-finite transform values for every method"
            flags[i] = r.flags
            continue
        error[i] = r.details.get("rounding_error", 0.0) + r.details.get("truncation_error", 0.0)
        if "talbot-unresolved" in r.flags:
            error[i] += r.details["convergence_gap"]
        u[i] = r.value
        disc[i] = r.discrepancy
        flags[i] = r.flags
        for m, val in r.method_values.items():
            method_values[m][i] = val
    good = np.isfinite(u)
    # contour error (rounding, truncation, convergence gap) against the peak, itself
    # taken over points resolved to 1e-6 of their own size
    trusted = good & (error <= 1e-6 * np.abs(np.nan_to_num(u)))
    peak = float(np.max(u[trusted])) if trusted.any() else math.nan
    for i in np.flatnonzero(good & ~(error <= FAIL_FRACTION * abs(peak))):
        failures[int(i)] = (f"contour error estimate {error[i]:.3g} exceeds "
                            f"{FAIL_FRACTION:g} of the peak")
        u[i] = np.nan
    good = np.isfinite(u)
    for i in np.flatnonzero(good & (error > LOW_ACCURACY_FRACTION * abs(peak))):
        flags[i] = flags[i] + ("low-accuracy",)
    peak = float(np.max(u[good])) if good.any() else math.nan
    for i in range(n):
        if good[i] and u[i] < -1e-6 * peak:
            flags[i] = flags[i] + ("negative",)

    diagnostics = {
        "peak": peak,
        "min_value": float(np.min(u[good])) if good.any() else math.nan,
        "max_discrepancy": float(np.nanmax(disc)) if good.any() else math.nan,
        "failed_points": len(failures),
        "tolerance": tol,
        "flux": None if flux is None else flux.diagnostics,
    }
    try:
        edge = distribution_function(t, np.array([x[0], x[-1]]), init, params, flux=flux,
                                     inv=InversionConfig("talbot", inv.talbot_nodes,
                                                         inv.talbot_max_nodes), tol=tol)
        head, below_top = float(edge[0]), float(edge[1])
        diagnostics["head_mass"] = head
        diagnostics["tail_mass"] = init.total_mass - below_top
    except FbmFpError as exc:
        head = math.nan
        diagnostics["head_mass"] = math.nan
        diagnostics["tail_mass"] = math.nan
        diagnostics["edge_mass_error"] = str(exc)
    if good.all() and n > 1:
        diagnostics["normalization"] = head + float(np.trapezoid(u, x))
    else:
        diagnostics["normalization"] = math.nan
    if mode == "reflecting":
        beta = boundary_exponent(t, params)
        diagnostics["boundary_exponent"] = beta
        try:
            diagnostics["boundary_limit"] = boundary_limit(t, init, params)
        except FbmFpError as exc:
            diagnostics["boundary_limit"] = math.nan
            diagnostics["boundary_limit_error"] = str(exc)
        diagnostics["boundary_extrapolation"] = _boundary_fit(x, u, beta)
    return DensityCurve(
        t=float(t),
        x_grid=x,
        u=u,
        xi=init.xi,
        mode=mode,
        params=params,
        discrepancy=disc,
        flags=tuple(flags),
        method_values=method_values,
        failures=failures,
        diagnostics=diagnostics,
    )


def moment_check(curve: DensityCurve, params: FpkParams, edge_limit=1e-3):
    """Compare the curve's first moment with ``E(t)``.

    The moment identity assumes the boundary terms vanish, so the report
    carries a warning when more than ``edge_limit`` of the mass lies outside
    the grid.
    """
    if curve.mode != "reflecting":
        raise DomainError("moment check applies to reflecting curves only")
    if curve.xi is None:
        raise DomainError("moment check needs a point-mass curve")
    x, u = curve.x_grid, curve.u
    head = curve.diagnostics.get("head_mass", 0.0)
    beta = max(curve.diagnostics.get("boundary_exponent", 1.0), 0.0)
    head_moment = x[0] * head * beta / (beta + 1.0) if np.isfinite(head) else 0.0
    mean = float(np.trapezoid(x * u, x)) + head_moment
    expected = expected_mean(curve.t, curve.xi, params)
    tail = curve.diagnostics.get("tail_mass", math.nan)
    warnings = []
    if not (abs(tail) <= edge_limit and abs(head) <= edge_limit):
        warnings.append(f"edge mass (head {head:.3g}, tail {tail:.3g}) exceeds {edge_limit:g}; "
                        "boundary terms may bias the moment")
    return {
        "mean": mean,
        "expected": expected,
        "relative_deviation": abs(mean - expected) / abs(expected),
        "head_mass": head,
        "tail_mass": tail,
        "warnings": warnings,
    }
