"""Quadrature building blocks.

``gauss_kronrod`` is a globally adaptive 7/15-point Gauss-Kronrod integrator
that works on a *batch* of complex integrands sharing one abscissa: the
integrand returns an ``(n_points, n_batch)`` array and an interval is refined
while any member of the batch needs it. The Laplace-domain code evaluates
hundreds of Laplace points per call, so this is what keeps it vectorised.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _leg

from .errors import QuadratureError

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
# Embedded 7-point Gauss rule lives on the odd Kronrod positions.
GAUSS_WEIGHTS_ON_KRONROD = np.zeros(15)
GAUSS_WEIGHTS_ON_KRONROD[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], [_WG[-1]], _WG[:-1][::-1]])

_EPS = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    nodes, weights = _leg.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def legendre_antiderivative_matrix(nodes, targets):
    """Matrix mapping samples at ``nodes`` to ``int_{-1}^{target} p(y) dy``.

    ``p`` is the polynomial interpolant of the samples; ``nodes`` and
    ``targets`` live in [-1, 1].
    """
    nodes = np.asarray(nodes, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = len(nodes)
    vander = _leg.legvander(nodes, n - 1)
    inv = np.linalg.inv(vander)
    p_next = _leg.legvander(targets, n)
    integ = np.empty((len(targets), n))
    integ[:, 0] = targets + 1.0
    for j in range(1, n):
        integ[:, j] = (p_next[:, j + 1] - p_next[:, j - 1]) / (2 * j + 1)
    return integ @ inv


KRONROD_CUMULATIVE = legendre_antiderivative_matrix(KRONROD_NODES, KRONROD_NODES)


def graded_points(left, right, toward, levels, ratio=0.5):
    """Points grading geometrically from ``right - left`` down toward one end.

    ``toward='right'`` yields ``right - (right-left) * ratio**k`` for k = 1..levels;
    ``toward='left'`` mirrors it.
    """
    widths = (right - left) * ratio ** np.arange(1, levels + 1)
    if toward == "right":
        return right - widths
    return left + widths


@dataclass
class KronrodResult:
    """Outcome of :func:`gauss_kronrod`.

    ``value`` and ``error`` have one entry per batch member. ``lower``/``upper``
    are the final intervals (sorted) and ``samples`` the integrand on their
    Kronrod nodes, shape ``(n_intervals, 15, n_batch)``, when ``keep_samples``
    was requested.
    """

    value: np.ndarray
    error: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    samples: np.ndarray | None
    n_evaluations: int

    def nodes(self):
        half = 0.5 * (self.upper - self.lower)
        mid = 0.5 * (self.upper + self.lower)
        return mid[:, None] + half[:, None] * KRONROD_NODES[None, :]

    def cumulative(self):
        """Integral from the left end of the domain to every Kronrod node.

        Returns an array shaped like ``samples``.
        """
        if self.samples is None:
            raise ValueError("cumulative() needs keep_samples=True")
        half = 0.5 * (self.upper - self.lower)
        within = np.einsum("kj,ijm->ikm", KRONROD_CUMULATIVE, self.samples) * half[:, None, None]
        totals = np.einsum("j,ijm->im", KRONROD_WEIGHTS, self.samples) * half[:, None]
        offsets = np.cumsum(totals, axis=0) - totals
        return within + offsets[:, None, :]

    def weights(self):
        half = 0.5 * (self.upper - self.lower)
        return half[:, None] * KRONROD_WEIGHTS[None, :]


def _kronrod_block(func, lower, upper):
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    x = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
    fx = np.asarray(func(x.ravel()))
    fx = fx.reshape(len(lower), 15, -1)
    kron = np.einsum("j,ijm->im", KRONROD_WEIGHTS, fx) * half[:, None]
    gauss = np.einsum("j,ijm->im", GAUSS_WEIGHTS_ON_KRONROD, fx) * half[:, None]
    abs_half = np.abs(half)[:, None]
    resabs = np.einsum("j,ijm->im", KRONROD_WEIGHTS, np.abs(fx)) * abs_half
    mean = np.where(half[:, None] != 0, kron / np.where(half == 0, 1.0, 2.0 * half)[:, None], 0.0)
    resasc = np.einsum("j,ijm->im", KRONROD_WEIGHTS, np.abs(fx - mean[:, None, :])) * abs_half
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _UFLOW / (50.0 * _EPS), np.maximum(floor, err), err)
    return kron, err, fx


def gauss_kronrod(func, breakpoints, tol=1e-10, rel_tol=0.0, max_intervals=2000,
                  keep_samples=False):
    """Adaptive G7/K15 quadrature of a batch of (complex) integrands.

    Parameters
    ----------
    func : callable
        ``func(x)`` with ``x`` of shape ``(n,)`` returns ``(n,)`` or ``(n, m)``.
    breakpoints : array_like
        Sorted initial partition of the integration interval (at least two points).
    tol, rel_tol : float
        Absolute and relative targets; a batch member is converged when its
        summed error estimate is below ``max(tol, rel_tol * |value|)``.
    max_intervals : int
        Subdivision budget.

    Raises
    ------
    QuadratureError
        When the budget is exhausted, carrying the achieved error estimate.
    """
    bps = np.unique(np.asarray(breakpoints, dtype=float))
    if len(bps) < 2:
        m = np.asarray(func(bps[:1])).reshape(1, -1).shape[1]
        zero = np.zeros(m, dtype=complex)
        return KronrodResult(zero, np.zeros(m), bps[:0], bps[:0],
                             np.zeros((0, 15, m), complex) if keep_samples else None, 0)

    lower = bps[:-1]
    upper = bps[1:]
    kron, err, fx = _kronrod_block(func, lower, upper)
    n_eval = 15 * len(lower)
    while True:
        value = kron.sum(axis=0)
        total_err = err.sum(axis=0)
        target = np.maximum(tol, rel_tol * np.abs(value))
        if np.all(total_err <= target):
            break
        norm_err = (err / target[None, :]).max(axis=1)
        width = upper - lower
        splittable = width > 64 * _EPS * np.maximum(np.abs(lower), np.abs(upper))
        candidates = (norm_err > 1.0 / len(lower)) & splittable
        if not candidates.any():
            idx = np.argmax(np.where(splittable, norm_err, -np.inf))
            if not splittable[idx]:
                raise QuadratureError(
                    "intervals cannot be subdivided further", float(np.max(total_err))
                )
            candidates[idx] = True
        n_new = int(candidates.sum())
        if len(lower) + n_new > max_intervals:
            raise QuadratureError(
                f"tolerance {tol:g} not reached within {max_intervals} intervals "
                f"(achieved {np.max(total_err):.3g})",
                float(np.max(total_err)),
            )
        lo_c, hi_c = lower[candidates], upper[candidates]
        mid = 0.5 * (lo_c + hi_c)
        new_lo = np.concatenate([lo_c, mid])
        new_hi = np.concatenate([mid, hi_c])
        k_new, e_new, f_new = _kronrod_block(func, new_lo, new_hi)
        n_eval += 15 * len(new_lo)
        keep = ~candidates
        lower = np.concatenate([lower[keep], new_lo])
        upper = np.concatenate([upper[keep], new_hi])
        kron = np.concatenate([kron[keep], k_new])
        err = np.concatenate([err[keep], e_new])
        fx = np.concatenate([fx[keep], f_new]) if keep_samples else fx[:0]

    order = np.argsort(lower)
    samples = fx[order] if keep_samples else None
    return KronrodResult(kron.sum(axis=0), err.sum(axis=0), lower[order], upper[order],
                         samples, n_eval)
