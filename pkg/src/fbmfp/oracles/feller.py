"""Closed-form transition law of the square-root diffusion (the v = 1/2 case).

At v = 1/2 the equation is the forward equation of
``dX = (bX + c) dt + sqrt(2 a X) dW``. Its transition law from ``X_0 = xi`` is
``k * chi2'(d, lam)`` with::

    k   = a (e^{bt} - 1) / (2b)     (a t / 2 when b = 0)
    d   = 2c / a
    lam = xi e^{bt} / k
"""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import ncx2

from ..errors import DomainError
from ..params import FpkParams
from ..special_fn import noncentral_chi2_pdf


def _law(t, xi, params: FpkParams):
    if params.v != 0.5:
        raise DomainError("the closed form requires v = 1/2")
    if not params.c > 0:
        raise DomainError("the closed form needs 2c/a > 0")
    if not (t > 0 and xi > 0):
        raise DomainError("t and xi must be positive")
    if params.b == 0:
        scale = 0.5 * params.a * t
    else:
        scale = 0.5 * params.a * math.expm1(params.b * t) / params.b
    dof = 2.0 * params.c / params.a
    lam = xi * math.exp(params.b * t) / scale
    return scale, dof, lam


def feller_v_half_density(t, x, xi, params: FpkParams):
    """Transition density ``u(t, x; xi)`` at v = 1/2."""
    scale, dof, lam = _law(t, xi, params)
    x = np.asarray(x, dtype=float)
    return noncentral_chi2_pdf(x / scale, dof, lam) / scale


def feller_v_half_cdf(t, x, xi, params: FpkParams):
    """Transition distribution function at v = 1/2 (scipy's noncentral chi-squared)."""
    scale, dof, lam = _law(t, xi, params)
    return ncx2.cdf(np.asarray(x, dtype=float) / scale, dof, lam)
