"""Square-root (CIR-type) asset model driven by fractional Brownian motion.

The asset follows ``dS = [(r - a) S - h] dt + sigma sqrt(S) dB^H`` and its
transition density is obtained from the generic solver after the substitution::

    a := H sigma^2,  v := H,  b := r - H sigma^2,  c := -h,  xi := S_t,  t := T - t

Nothing is re-derived here: the density is exactly the solver's output for the
mapped constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, UnsupportedRegimeError
from .inversion import InversionConfig
from .laplace_domain import DEFAULT_TOLERANCE, InitialDistribution
from .params import FpkParams
from .solver import DensityCurve, density_curve

__all__ = ["CirParams", "map_cir_to_fpk", "cir_transition_density"]


@dataclass(frozen=True)
class CirParams:
    """Market description: Hurst index, volatility, rate, drift constant ``h``, spot and horizon."""

    hurst: float
    sigma: float
    rate: float
    dividend_h: float
    s_t: float
    delta_t: float

    def __post_init__(self):
        for name in ("hurst", "sigma", "rate", "dividend_h", "s_t", "delta_t"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real number")
        if not 0 < self.hurst < 1:
            raise DomainError("hurst must lie in (0, 1)")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if not (self.s_t > 0 and self.delta_t > 0):
            raise DomainError("s_t and delta_t must be positive")


def map_cir_to_fpk(p: CirParams):
    """Return ``(FpkParams, xi, t)`` for the market parameters.

    Raises
    ------
    UnsupportedRegimeError
        When ``r - H sigma^2 < 0``.
    """
    a = p.hurst * p.sigma ** 2
    b = p.rate - a
    if b < 0:
        raise UnsupportedRegimeError(
            f"r - H sigma^2 = {b:.6g} < 0 lies outside the supported regime"
        )
    return FpkParams(a=a, b=b, c=-p.dividend_h, v=p.hurst), p.s_t, p.delta_t


def cir_transition_density(p: CirParams, s_T_grid=None, mode="reflecting",
                           inv: InversionConfig = InversionConfig(),
                           tol=DEFAULT_TOLERANCE) -> DensityCurve:
    """Density of ``S_T`` given ``S_t``, with the horizon playing the role of time."""
    params, xi, t = map_cir_to_fpk(p)
    return density_curve(t, s_T_grid, InitialDistribution.point_mass(xi), mode, params, inv,
                         tol=tol)
