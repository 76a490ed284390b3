"""Model constants of the fractional Fokker-Planck equation.

The equation is ``u_t = (a t^(2v-1) x u)_xx - ((b x + c) u)_x`` on ``x > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, UnsupportedRegimeError


@dataclass(frozen=True)
class FpkParams:
    """Constants ``a, b, c, v`` of the PDE.

    ``a`` scales the diffusion, ``b`` and ``c`` are the slope and intercept of
    the linear drift, and ``v`` is the Hurst-type exponent. Only ``b >= 0`` is
    supported: for ``b < 0`` the incomplete gamma functions would need a
    negative argument, which has no real value for non-integer ``2v``.
    """

    a: float
    b: float
    c: float
    v: float

    def __post_init__(self):
        for name in ("a", "b", "c", "v"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.a <= 0:
            raise DomainError(f"a must be positive, got {self.a}")
        if self.v <= 0:
            raise DomainError(f"v must be positive, got {self.v}")
        if self.b < 0:
            raise UnsupportedRegimeError(
                f"b = {self.b} < 0 is outside the supported regime (b >= 0)"
            )

    def diffusion_coefficient(self, t):
        """Return ``a t^(2v-1)``, the time factor of the diffusion term."""
        return self.a * t ** (2.0 * self.v - 1.0)

    def singular_exponent(self, t):
        """Return ``c / (a t^(2v-1))``, the power of the flux-kernel singularity at time t."""
        return self.c / self.diffusion_coefficient(t)

    def mean(self, t, xi):
        """First moment ``xi e^{bt} + (c/b)(e^{bt} - 1)`` (``xi + c t`` when b = 0)."""
        if self.b == 0.0:
            return xi + self.c * t
        growth = math.exp(self.b * t)
        return xi * growth + self.c * math.expm1(self.b * t) / self.b

    def as_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "v": self.v}
