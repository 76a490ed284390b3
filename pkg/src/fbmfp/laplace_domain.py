"""Laplace-domain solution omega(t, s) of the fractional Fokker-Planck equation.

Along the characteristic through the query point (t, s) the reciprocal Laplace
variable is ``z(mu) = delta(mu, t) + e^{b(mu - t)} / s`` for ``0 <= mu <= t``.
With ``ghat(t1 -> t2) = int_{t1}^{t2} c / z(mu) dmu`` the solution reads::

    omega(t, s) = e^{-ghat(0 -> t)} pi(s0) + int_0^t f(tau) e^{-ghat(tau -> t)} dtau
    s0          = s e^{bt} / (1 - s e^{bt} psi(t))

``f`` is the flux at the origin (zero for the reflecting solution) and ``pi``
the Laplace transform of the initial distribution. Fixing the base point of
the integral at 0 removes the unobservable integration constant of the
indefinite form, and writing the denominator through ``delta`` avoids the
b -> 0 divergence of the raw gamma expression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc, erfcx

from .errors import DivergenceError, DomainError, SingularityError
from .params import FpkParams
from .quadrature import gauss_kronrod, graded_points
from .special_fn import KernelContext, delta, phi, psi

__all__ = [
    "FpkParams",
    "InitialDistribution",
    "GHatSpec",
    "LaplaceEvaluation",
    "pi_eval",
    "log_pi_eval",
    "pi_argument",
    "g_hat",
    "omega",
    "omega_values",
    "omega_transform",
    "pde_residual",
    "DEFAULT_TOLERANCE",
]

DEFAULT_TOLERANCE = 1e-10
MAX_INTERVALS = 2000
_CHUNK = 256


@dataclass(frozen=True)
class InitialDistribution:
    """Initial data through its Laplace-Stieltjes transform ``pi(s)``.

    Build instances with :meth:`point_mass`, :meth:`gaussian_bump` or
    :meth:`general` rather than the constructor.
    """

    kind: str
    xi: float | None = None
    transform: Callable | None = None
    log_transform: Callable | None = None
    abscissa: float = -math.inf
    total_mass: float = 1.0
    description: str = ""

    @classmethod
    def point_mass(cls, xi):
        if not (isinstance(xi, (int, float)) and math.isfinite(xi) and xi > 0):
            raise DomainError(f"point mass location must be positive, got {xi!r}")
        xi = float(xi)
        return cls("point", xi=xi, description=f"point mass at {xi!r}")

    @classmethod
    def gaussian_bump(cls, center, width):
        """Normal density N(center, width^2) restricted to x > 0.

        The transform is ``exp(-z m + z^2 w^2 / 2) Phi((m - z w^2) / w)``,
        valid for every complex z.
        """
        if not (center > 0 and width > 0):
            raise DomainError("bump center and width must be positive")
        m, w = float(center), float(width)

        def log_transform(z):
            z = np.asarray(z, dtype=complex)
            arg = -(m - z * w * w) / (w * math.sqrt(2.0))
            tail = np.where(
                arg.real > 0,
                np.log(0.5 * erfcx(np.where(arg.real > 0, arg, 0))) - arg * arg,
                np.log(0.5 * erfc(np.where(arg.real > 0, 0, arg))),
            )
            return -z * m + 0.5 * (z * w) ** 2 + tail

        mass = 0.5 * math.erfc(-m / (w * math.sqrt(2.0)))
        return cls(
            "general",
            xi=m,
            transform=lambda z: np.exp(log_transform(z)),
            log_transform=log_transform,
            total_mass=mass,
            description=f"gaussian bump center={m!r} width={w!r}",
        )

    @classmethod
    def general(cls, transform, *, abscissa=0.0, log_transform=None, total_mass=None,
                description="user transform"):
        """Wrap a user-supplied ``pi(z)``; ``abscissa`` is its convergence abscissa."""
        if total_mass is None:
            total_mass = float(np.real(transform(np.array([0.0 + 0.0j]))[0]))
        if not math.isfinite(total_mass):
            raise DomainError("pi(0) (the total mass) must be finite")
        return cls("general", transform=transform, log_transform=log_transform,
                   abscissa=float(abscissa), total_mass=float(total_mass),
                   description=description)


def _check_abscissa(init, z):
    if init.kind == "general" and np.any(np.real(z) < init.abscissa):
        raise DivergenceError(
            f"transform evaluated at Re(z) below its abscissa {init.abscissa}"
        )


def pi_eval(init: InitialDistribution, z):
    """Evaluate the initial-data transform ``pi(z)``; ``e^{-z xi}`` for a point mass."""
    z_arr = np.asarray(z, dtype=complex)
    if init.kind == "point":
        out = np.exp(-z_arr * init.xi)
    else:
        _check_abscissa(init, z_arr)
        out = np.asarray(init.transform(z_arr), dtype=complex)
    return complex(out) if z_arr.ndim == 0 else out


def log_pi_eval(init: InitialDistribution, z):
    """``log pi(z)`` (any branch); used to combine with ``-ghat`` before exponentiating."""
    z_arr = np.asarray(z, dtype=complex)
    if init.kind == "point":
        return -z_arr * init.xi
    _check_abscissa(init, z_arr)
    if init.log_transform is not None:
        return np.asarray(init.log_transform(z_arr), dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(init.transform(z_arr), dtype=complex))


def pi_argument(t, s, params: FpkParams):
    """Argument of ``pi`` in the solution: ``s e^{bt} / (1 - s e^{bt} psi(t))``.

    Raises
    ------
    SingularityError
        If the denominator vanishes (impossible for real s > 0 since psi <= 0).
    """
    if not t >= 0:
        raise DomainError("t must be non-negative")
    s_arr = np.asarray(s, dtype=complex)
    grow = math.exp(params.b * t)
    den = 1.0 - s_arr * grow * psi(t, params)
    if np.any(np.abs(den) <= 1e-300 + 1e-14 * np.abs(s_arr * grow)):
        raise SingularityError("pi argument denominator vanishes at this Laplace point")
    out = s_arr * grow / den
    return complex(out) if s_arr.ndim == 0 else out


@dataclass(frozen=True)
class GHatSpec:
    """Definite integral ``int_lower^upper c / (delta(mu, t_ref) + e^{b(mu - t_ref)}/s) dmu``."""

    lower: float
    upper: float
    context: KernelContext
    s: complex | np.ndarray
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper <= self.context.t_ref):
            raise DomainError("need 0 <= lower <= upper <= t_ref")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if np.any(np.asarray(self.s) == 0):
            raise DomainError("s must be non-zero")


def _ghat_integrand(t, params, s):
    s = np.asarray(s, dtype=complex).reshape(-1)
    inv_s = 1.0 / s

    def func(mu):
        d = delta(mu, t, params)
        e = np.exp(params.b * (mu - t))
        return params.c / (d[:, None] + e[:, None] * inv_s[None, :])

    return func


def _seed_points(lower, upper, t, params, s_abs_max, extra=()):
    """Initial partition graded toward mu = 0 and toward the boundary layer at mu = t."""
    pts = [lower, upper]
    if t > 0:
        pts.extend(graded_points(0.0, t, "left", 8))
        slope = params.diffusion_coefficient(t)
        layer = 1.0 / (slope * max(s_abs_max, 1e-300))
        levels = int(np.clip(np.ceil(np.log2(max(t / (0.1 * layer), 2.0))), 2, 60))
        pts.extend(graded_points(0.0, t, "right", levels))
    pts.extend(extra)
    pts = np.asarray(pts, dtype=float)
    pts = pts[(pts >= lower) & (pts <= upper)]
    return np.unique(pts)


def _ghat_batch(lower, upper, t, params, s, tol, keep_samples=False, extra=(),
                max_intervals=MAX_INTERVALS):
    s = np.asarray(s, dtype=complex).reshape(-1)
    seeds = _seed_points(lower, upper, t, params, float(np.max(np.abs(s))), extra)
    return gauss_kronrod(_ghat_integrand(t, params, s), seeds, tol=tol,
                         max_intervals=max_intervals, keep_samples=keep_samples)


def g_hat(spec: GHatSpec):
    """Adaptive Gauss-Kronrod value of the characteristic integral described by ``spec``.

    Returns a complex number (or an array when ``spec.s`` is an array).

    Raises
    ------
    QuadratureError
        When the tolerance cannot be met within the subdivision budget.
    """
    params = spec.context.params
    s_arr = np.asarray(spec.s, dtype=complex)
    if params.c == 0.0 or spec.lower == spec.upper:
        out = np.zeros(s_arr.shape, dtype=complex)
    else:
        res = _ghat_batch(spec.lower, spec.upper, spec.context.t_ref, params, s_arr,
                          spec.tolerance)
        out = res.value.reshape(s_arr.shape)
    return complex(out) if s_arr.ndim == 0 else out


@dataclass(frozen=True)
class LaplaceEvaluation:
    """One evaluation of omega with its intermediate quantities."""

    s: complex
    t: float
    C1: complex
    g_hat: complex
    pi_argument: complex
    omega: complex
    error_estimate: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _flux_term(res, total, flux, t):
    """``int_0^t f(tau) e^{-ghat(tau -> t)} dtau`` on the adapted mesh."""
    cum = res.cumulative()
    nodes = res.nodes()
    weights = res.weights()
    f_nodes = flux(nodes)
    kernel = np.exp(-(total[None, None, :] - cum))
    return np.einsum("ik,ik,ikm->m", weights, f_nodes, kernel)


def _omega_chunk(t, s, init, params, flux, tol, max_intervals):
    s0 = pi_argument(t, s, params)
    log_pi = log_pi_eval(init, s0)
    if params.c == 0.0:
        ghat = np.zeros(s.shape, dtype=complex)
        err = np.zeros(s.shape)
        flux_part = 0.0
        if flux is not None:
            flux_part = flux.integral(0.0, t)
        return np.exp(log_pi) + flux_part, ghat, err
    extra = () if flux is None else flux.grid[flux.grid < t]
    res = _ghat_batch(0.0, t, t, params, s, tol, keep_samples=flux is not None, extra=extra,
                      max_intervals=max_intervals)
    ghat = res.value
    with np.errstate(over="ignore"):
        value = np.exp(-ghat + log_pi)
    if flux is not None:
        value = value + _flux_term(res, ghat, flux, t)
    return value, ghat, res.error


def omega_values(t, s, init: InitialDistribution, params: FpkParams, flux=None,
                 tol=DEFAULT_TOLERANCE, chunk=_CHUNK, max_intervals=MAX_INTERVALS,
                 return_details=False):
    """Vectorised omega(t, s) for an array of Laplace points.

    Laplace points are sorted by modulus and integrated in chunks so that each
    adaptive mesh serves points of similar scale.

    Parameters
    ----------
    flux : FluxFunction or None
        ``None`` selects the reflecting (zero-flux) solution.
    tol : float
        Absolute tolerance of the characteristic integral.
    """
    if not t >= 0:
        raise DomainError("t must be non-negative")
    s_arr = np.asarray(s, dtype=complex)
    flat = s_arr.reshape(-1)
    if t == 0:
        out = np.asarray(pi_eval(init, flat), dtype=complex)
        zeros = np.zeros(flat.shape, dtype=complex)
        if return_details:
            return out.reshape(s_arr.shape), zeros.reshape(s_arr.shape), np.zeros(s_arr.shape)
        return out.reshape(s_arr.shape)
    if flux is not None and t > flux.grid[-1] * (1 + 1e-12):
        raise DomainError("t lies beyond the flux grid")
    order = np.argsort(np.abs(flat), kind="stable")
    out = np.empty(flat.shape, dtype=complex)
    ghat = np.empty(flat.shape, dtype=complex)
    err = np.empty(flat.shape)
    for start in range(0, len(flat), chunk):
        idx = order[start:start + chunk]
        out[idx], ghat[idx], err[idx] = _omega_chunk(t, flat[idx], init, params, flux, tol,
                                                     max_intervals)
    if return_details:
        return out.reshape(s_arr.shape), ghat.reshape(s_arr.shape), err.reshape(s_arr.shape)
    return out.reshape(s_arr.shape)


def omega(t, s, init: InitialDistribution, flux, params: FpkParams, tol=DEFAULT_TOLERANCE):
    """Evaluate omega(t, s) at a single point, returning all intermediate quantities.

    ``flux`` is a :class:`~fbmfp.flux.FluxFunction` or ``None``/``"reflecting"``.
    """
    if isinstance(flux, str):
        if flux != "reflecting":
            raise DomainError(f"unknown flux mode {flux!r}")
        flux = None
    s = complex(s)
    value, ghat, err = omega_values(t, np.array([s]), init, params, flux=flux, tol=tol,
                                    return_details=True)
    grow = math.exp(params.b * t)
    if params.b > 0 and s != 0:
        c1 = (1.0 - s * complex(phi(t, params))) / (s * grow)
    else:
        c1 = complex("nan+nanj")
    return LaplaceEvaluation(
        s=s,
        t=float(t),
        C1=c1,
        g_hat=complex(ghat[0]),
        pi_argument=complex(pi_argument(t, s, params)) if t > 0 else s,
        omega=complex(value[0]),
        error_estimate=float(err[0]),
        diagnostics={"mode": "reflecting" if flux is None else "lemma2-flux"},
    )


def omega_transform(t, init, params, flux=None, tol=DEFAULT_TOLERANCE):
    """Return ``F(s) = omega(t, s)`` as a vectorised callable for the inverters."""

    def transform(s):
        return omega_values(t, s, init, params, flux=flux, tol=tol)

    return transform


def pde_residual(t, s, init: InitialDistribution, params: FpkParams, step=1e-4,
                 tol=DEFAULT_TOLERANCE):
    """Residual ``omega_t + s (a t^(2v-1) s - b) omega_s + c s omega`` of the reflecting solution.

    Both derivatives are central differences with spacing ``step``; ``t``
    must exceed ``step``. Returns ``(residual, omega)``.
    """
    if not t > step:
        raise DomainError("t must exceed the difference step")
    s = complex(s)
    a, b, c, v = params.a, params.b, params.c, params.v
    pts = np.array([s, s + step, s - step])
    centre, up_s, down_s = omega_values(t, pts, init, params, tol=tol)
    up_t = omega_values(t + step, pts[:1], init, params, tol=tol)[0]
    down_t = omega_values(t - step, pts[:1], init, params, tol=tol)[0]
    d_t = (up_t - down_t) / (2 * step)
    d_s = (up_s - down_s) / (2 * step)
    residual = d_t + s * (a * t ** (2 * v - 1) * s - b) * d_s + c * s * centre
    return complex(residual), complex(centre)
