"""Incomplete gamma functions and the gamma/exponential combinations built on them.

Three combinations recur throughout the Laplace-domain solution::

    phi(mu)        = a b^(-2v) Gamma(2v, b mu) e^(b mu)
    psi(mu)        = a b^(-2v) (Gamma(2v, b mu) - Gamma(2v))
    delta(mu, t)   = a b^(-2v) e^(b mu) (Gamma(2v, b mu) - Gamma(2v, b t))

``phi`` diverges as b -> 0, so it is only exposed for diagnostics. ``psi`` and
``delta`` are evaluated without ever forming ``phi``; both have finite b -> 0
limits which are used directly when ``b mu`` is tiny.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import gammaln, ive

from .errors import DomainError, UnsupportedRegimeError
from .params import FpkParams

_EPS = np.finfo(float).eps
_FPMIN = np.finfo(float).tiny / _EPS
_MAX_ITER = 2000

# |b mu| below this switches psi to its three-term small-argument series.
SMALL_ARGUMENT = 1e-4

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _prefactor(q, p):
    """p^q e^{-p}, zero at p = 0."""
    with np.errstate(divide="ignore"):
        return np.exp(q * np.log(p) - p)


def _lower_series(q, p):
    """gamma(q, p) by its power series; accurate for p < q + 1."""
    term = 1.0 / q
    total = term.copy()
    ap = q.copy()
    active = np.ones(q.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = np.where(active, term * p / ap, 0.0)
        total = total + term
        active &= np.abs(term) > np.abs(total) * _EPS
        if not active.any():
            break
    else:  # pragma: no cover - the series always converges for p < q + 1
        raise ArithmeticError("incomplete gamma series failed to converge")
    return total * _prefactor(q, p)


def _upper_continued_fraction(q, p):
    """Gamma(q, p) by the Legendre continued fraction (modified Lentz); p >= q + 1."""
    b = p + 1.0 - q
    c = np.full(q.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(q.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        an = -i * (i - q)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        step = d * c
        h = np.where(active, h * step, h)
        active &= np.abs(step - 1.0) > _EPS
        if not active.any():
            break
    else:  # pragma: no cover
        raise ArithmeticError("incomplete gamma continued fraction failed to converge")
    return h * _prefactor(q, p)


def _check_gamma_args(q, p):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q <= 0):
        raise DomainError("incomplete gamma order must be positive")
    if np.any(np.isnan(p)) or np.any(p < 0):
        raise DomainError("incomplete gamma argument must be non-negative")
    return np.broadcast_arrays(q, p)


def _split(q, p, series_fn, fraction_fn):
    q, p = _check_gamma_args(q, p)
    scalar = q.ndim == 0
    q = np.atleast_1d(q).astype(float)
    p = np.atleast_1d(p).astype(float)
    out = np.empty(q.shape)
    use_series = p < q + 1.0
    if use_series.any():
        out[use_series] = series_fn(q[use_series], p[use_series])
    if (~use_series).any():
        out[~use_series] = fraction_fn(q[~use_series], p[~use_series])
    return float(out[0]) if scalar else out


def upper_incomplete_gamma(q, p):
    """Upper incomplete gamma ``Gamma(q, p) = int_p^inf x^(q-1) e^(-x) dx``.

    Uses the power series for ``p < q + 1`` and the continued fraction
    otherwise. At ``p = 0`` the complete gamma function is returned.

    Parameters
    ----------
    q : float or array_like
        Order, strictly positive.
    p : float or array_like
        Lower limit, non-negative.

    Raises
    ------
    DomainError
        For ``q <= 0`` or ``p < 0``.
    """
    return _split(
        q,
        p,
        lambda q_, p_: _gamma_fn(q_) - _lower_series(q_, p_),
        _upper_continued_fraction,
    )


def lower_incomplete_gamma(q, p):
    """Lower incomplete gamma ``gamma(q, p) = int_0^p x^(q-1) e^(-x) dx``."""
    return _split(
        q,
        p,
        _lower_series,
        lambda q_, p_: _gamma_fn(q_) - _upper_continued_fraction(q_, p_),
    )


def _require_supported(params: FpkParams):
    if params.b < 0:
        raise UnsupportedRegimeError("b < 0 is outside the supported regime")


def psi(mu, params: FpkParams):
    """``a b^(-2v) (Gamma(2v, b mu) - Gamma(2v))``, equal to ``-a int_0^mu y^(2v-1) e^(-b y) dy``.

    Non-positive for every ``mu >= 0``. The b -> 0 limit is ``-a mu^(2v) / (2v)``;
    for ``|b mu| < 1e-4`` a three-term series in ``b mu`` is used.
    """
    _require_supported(params)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr < 0) or np.any(np.isnan(mu_arr)):
        raise DomainError("psi requires mu >= 0")
    a, b, q = params.a, params.b, 2.0 * params.v
    mu1 = np.atleast_1d(mu_arr)
    bm = b * mu1
    out = np.empty(mu1.shape)
    small = bm < SMALL_ARGUMENT
    if small.any():
        m = mu1[small]
        x = bm[small]
        out[small] = -a * m**q * (1.0 / q - x / (q + 1.0) + x * x / (2.0 * (q + 2.0)))
    if (~small).any():
        out[~small] = -a * b ** (-q) * lower_incomplete_gamma(q, bm[~small])
    return float(out[0]) if mu_arr.ndim == 0 else out


def phi(mu, params: FpkParams):
    """``a b^(-2v) Gamma(2v, b mu) e^(b mu)``; diverges as b -> 0, so b must be positive."""
    if params.b <= 0:
        raise DomainError("phi is only finite for b > 0")
    q = 2.0 * params.v
    mu_arr = np.asarray(mu, dtype=float)
    return params.a * params.b ** (-q) * upper_incomplete_gamma(q, params.b * mu_arr) * np.exp(
        params.b * mu_arr
    )


def _delta_near(mu, t_ref, params):
    # a * int_mu^t y^(2v-1) e^(-b (y - mu)) dy; free of cancellation for mu close to t.
    half = 0.5 * (t_ref - mu)
    mid = 0.5 * (t_ref + mu)
    y = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    integrand = y ** (2.0 * params.v - 1.0) * np.exp(-params.b * (y - mu[:, None]))
    return params.a * half * (integrand @ _GL_WEIGHTS)


def delta(mu, t_ref, params: FpkParams):
    """``a b^(-2v) e^(b mu) (Gamma(2v, b mu) - Gamma(2v, b t_ref))`` for ``0 <= mu <= t_ref``.

    Equivalently ``a int_mu^t_ref y^(2v-1) e^(-b (y - mu)) dy``, which is the
    form used when ``mu > t_ref / 2`` so that the difference of two nearly
    equal gamma values is never taken. Elsewhere it is ``e^(b mu)(psi(mu) - psi(t_ref))``.
    """
    _require_supported(params)
    mu_arr = np.asarray(mu, dtype=float)
    mu1 = np.atleast_1d(mu_arr)
    if np.any(mu1 < 0) or np.any(np.isnan(mu1)):
        raise DomainError("delta requires mu >= 0")
    if np.any(mu1 > t_ref * (1.0 + 1e-15)):
        raise DomainError("delta requires mu <= t_ref")
    mu1 = np.minimum(mu1, t_ref)
    out = np.empty(mu1.shape)
    near = mu1 > 0.5 * t_ref
    if near.any():
        out[near] = _delta_near(mu1[near], t_ref, params)
    if (~near).any():
        far = mu1[~near]
        out[~near] = np.exp(params.b * far) * (psi(far, params) - psi(t_ref, params))
    return float(out[0]) if mu_arr.ndim == 0 else out


@dataclass(frozen=True)
class KernelContext:
    """The gamma combinations for fixed model constants and reference time ``t_ref``."""

    params: FpkParams
    t_ref: float

    def __post_init__(self):
        if not self.t_ref >= 0:
            raise DomainError("t_ref must be non-negative")

    @cached_property
    def psi_ref(self):
        return psi(self.t_ref, self.params)

    def psi(self, mu):
        return psi(mu, self.params)

    def delta(self, mu):
        return delta(mu, self.t_ref, self.params)

    def phi(self, mu):
        return phi(mu, self.params)


def noncentral_chi2_pdf(x, dof, noncentrality):
    """Density of the noncentral chi-squared law with ``dof`` degrees of freedom.

    Evaluated from the Bessel form
    ``0.5 e^{-(x+lam)/2} (x/lam)^{dof/4-1/2} I_{dof/2-1}(sqrt(lam x))`` with the
    exponentially scaled Bessel function so no intermediate overflows.
    """
    if not dof > 0:
        raise DomainError("dof must be positive")
    if not noncentrality >= 0:
        raise DomainError("noncentrality must be non-negative")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise DomainError("x must be non-negative")
    x1 = np.atleast_1d(x_arr)
    k = 0.5 * dof
    lam = float(noncentrality)
    out = np.empty(x1.shape)
    zero = x1 == 0
    pos = ~zero
    if lam == 0.0:
        xp = x1[pos]
        out[pos] = np.exp((k - 1.0) * np.log(xp) - 0.5 * xp - k * np.log(2.0) - gammaln(k))
        origin = np.inf if dof < 2 else (0.5 if dof == 2 else 0.0)
    else:
        xp = x1[pos]
        root = np.sqrt(lam * xp)
        log_scale = -0.5 * (np.sqrt(xp) - np.sqrt(lam)) ** 2 + (0.5 * k - 0.5) * np.log(xp / lam)
        out[pos] = 0.5 * np.exp(log_scale) * ive(k - 1.0, root)
        origin = np.inf if dof < 2 else (0.5 * np.exp(-0.5 * lam) if dof == 2 else 0.0)
    out[zero] = origin
    return float(out[0]) if x_arr.ndim == 0 else out
