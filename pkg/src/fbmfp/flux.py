"""Boundary flux at the origin and the kernel it is tied to.

Requiring the Laplace-domain solution to be the transform of a density links
the flux ``f`` to the initial data through a first-kind Volterra equation::

    int_0^t K(t, tau) f(tau) dtau = -g(t),      g(t) = pi(-1 / psi(t))
    K(t, tau) = exp(int_0^tau c / delta(mu, t) dmu)

Near ``tau = t`` the inner integral grows like ``beta log(t / (t - tau))`` with
``beta = c / (a t^(2v-1))``, so ``K = (t / (t - tau))^beta exp(R(tau))`` with a
bounded remainder ``R``. The kernel is integrable only while ``beta < 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import roots_jacobi

from .errors import DomainError, IllConditionedError, NonIntegrableKernelError
from .laplace_domain import InitialDistribution, pi_eval
from .params import FpkParams
from .quadrature import gauss_kronrod, gauss_legendre, graded_points, legendre_antiderivative_matrix
from .special_fn import delta, psi

__all__ = [
    "FluxFunction",
    "solve_flux",
    "lemma2_residual",
    "boundary_limit",
    "boundary_exponent",
    "flux_rhs",
    "kernel_remainder",
]

_NODES = 16
_GL_X, _GL_W = gauss_legendre(_NODES)
_GL_CUM = legendre_antiderivative_matrix(_GL_X, _GL_X)
_GEOMETRIC_LEVELS = 20
SINGULAR_TOLERANCE = 1e-12


def boundary_exponent(t, params: FpkParams):
    """``beta = c / (a t^(2v-1))``: the kernel singularity and small-x power of the density."""
    return params.singular_exponent(t)


def flux_rhs(t, init: InitialDistribution, params: FpkParams):
    """``g(t) = pi(-1 / psi(t))``; zero at t = 0 for a point mass."""
    if t == 0:
        if init.kind == "point":
            return 0.0
        return float(np.real(pi_eval(init, 1e15)))
    return float(np.real(pi_eval(init, -1.0 / psi(t, params))))


def kernel_remainder(mu, t, params: FpkParams):
    """``c / delta(mu, t) - beta / (t - mu)``, bounded on ``[0, t]``.

    For ``mu > t/2`` the difference is formed analytically as
    ``c (A (t - mu) - delta) / (delta A (t - mu))`` with the numerator
    integrated directly, so nothing cancels as ``mu -> t``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    slope = params.diffusion_coefficient(t)
    beta = params.c / slope
    # the limit at mu = t is approached from a hair below
    mu = np.minimum(mu, t * (1.0 - 1e-9))
    gap = t - mu
    out = np.empty(mu.shape)
    near = mu > 0.5 * t
    if (~near).any():
        m = mu[~near]
        out[~near] = params.c / delta(m, t, params) - beta / (t - m)
    if near.any():
        m = mu[near]
        g = gap[near]
        nodes, weights = gauss_legendre(32)
        y = m[:, None] + 0.5 * g[:, None] * (nodes[None, :] + 1.0)
        q = 2.0 * params.v - 1.0
        diff = (-(t ** q) * np.expm1(q * np.log1p((y - t) / t))
                - y ** q * np.expm1(-params.b * (y - m[:, None])))
        numer = params.a * 0.5 * g * (diff @ weights)
        dlt = delta(m, t, params)
        out[near] = params.c * numer / (dlt * slope * g)
    return out


@dataclass(frozen=True)
class FluxFunction:
    """Piecewise-constant flux ``f`` on a uniform grid.

    ``cell_values[j]`` is the flux on ``(grid[j], grid[j+1]]``; ``values`` are
    node values obtained from the cell values (midpoint averages inside,
    linear extrapolation at the ends). ``rhs`` holds ``g`` at the nodes and
    ``residuals`` the discrete Volterra residuals.
    """

    grid: np.ndarray
    cell_values: np.ndarray
    values: np.ndarray
    rhs: np.ndarray
    residuals: np.ndarray
    params: FpkParams
    shift: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, tau, side="left") - 1, 0, len(self.cell_values) - 1)
        return self.cell_values[idx]

    def integral(self, lower, upper):
        """Exact integral of the piecewise-constant flux over ``[lower, upper]``."""
        edges = self.grid
        lo = np.clip(edges[:-1], lower, upper)
        hi = np.clip(edges[1:], lower, upper)
        return float(np.sum(self.cell_values * (hi - lo)))

    def kernel_exponent(self, t, tau):
        """``int_0^tau c / delta(mu, t) dmu`` for ``0 <= tau < t``."""
        return _kernel_exponent(t, tau, self.params)


def _kernel_exponent(t, tau, params):
    if params.c == 0.0 or tau == 0.0:
        return 0.0
    beta = boundary_exponent(t, params)
    seeds = np.unique(np.concatenate([[0.0, tau], graded_points(0.0, tau, "left", 12)]))
    res = gauss_kronrod(lambda m: kernel_remainder(m, t, params), seeds, tol=1e-13)
    return beta * math.log(t / (t - tau)) + float(np.real(res.value[0]))


@lru_cache(maxsize=64)
def _jacobi_rule(beta):
    x, w = roots_jacobi(_NODES, -beta, 0.0)
    return x, w, legendre_antiderivative_matrix(_GL_X, x)


def _panels(edges_before, last_lo, last_hi):
    """Regular panels up to the midpoint of the last cell; the first cell is graded toward 0."""
    pts = list(edges_before) + [last_lo, 0.5 * (last_lo + last_hi)]
    first_hi = pts[1]
    pts.extend(graded_points(0.0, first_hi, "left", _GEOMETRIC_LEVELS))
    return np.unique(np.asarray(pts, dtype=float))


def _weights_at(i, grid, params):
    """Integrals of ``K(t_i, .)`` over the cells ``1..i`` (1-based)."""
    t = grid[i]
    beta = boundary_exponent(t, params)
    last_lo = grid[i - 1]
    bps = _panels(grid[:i], last_lo, t)
    lo, hi = bps[:-1], bps[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    tau = mid[:, None] + half[:, None] * _GL_X[None, :]
    if params.c == 0.0:
        r = np.zeros_like(tau)
    else:
        r = kernel_remainder(tau.ravel(), t, params).reshape(tau.shape)
    panel_int = (r @ _GL_W) * half
    offsets = np.cumsum(panel_int) - panel_int
    rem = offsets[:, None] + half[:, None] * (r @ _GL_CUM.T)
    kern = (t / (t - tau)) ** beta * np.exp(rem)
    panel_w = (kern @ _GL_W) * half
    cell = np.clip(np.searchsorted(grid, mid, side="right") - 1, 0, i - 1)
    weights = np.bincount(cell, weights=panel_w, minlength=i)

    # right half of the last cell carries the (t - tau)^(-beta) singularity
    j_lo, j_hi = 0.5 * (last_lo + t), t
    j_half = 0.5 * (j_hi - j_lo)
    if beta >= 1.0:
        return weights, np.inf, beta
    if params.c == 0.0:
        weights[i - 1] += j_hi - j_lo
        return weights, 0.0, beta
    x, w, cum = _jacobi_rule(float(beta))
    r_j = kernel_remainder(j_lo + j_half * (_GL_X + 1.0), t, params)
    rem_j = offsets[-1] + panel_int[-1] + j_half * (cum @ r_j)
    sing = j_half ** (1.0 - beta) * t ** beta * float(np.exp(rem_j) @ w)
    weights[i - 1] += sing
    return weights, sing, beta


def solve_flux(t_grid, init: InitialDistribution, params: FpkParams, shift=0.0,
               singular_tolerance=SINGULAR_TOLERANCE):
    """Solve the flux equation by product integration on a uniform grid.

    The flux is piecewise constant on the cells and the kernel is integrated
    exactly over each cell (Gauss-Legendre on regular panels, Gauss-Jacobi on
    the half cell touching the singularity), giving a lower-triangular system
    solved by forward substitution.

    Parameters
    ----------
    t_grid : array_like
        Uniform grid starting at 0.
    shift : float
        Optional Lavrentiev shift added to the diagonal (reported in diagnostics).
    singular_tolerance : float
        At nodes where the kernel is not integrable (``beta >= 1``) the flux on
        the last cell is set to zero, which is accepted only if the equation is
        then already satisfied to ``singular_tolerance * (1 + |g|)``.

    Raises
    ------
    NonIntegrableKernelError
        When ``beta >= 1`` at a node whose equation cannot be met with zero flux.
    IllConditionedError
        When the triangular solve produces non-finite values.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise DomainError("flux grid needs at least two nodes")
    if grid[0] != 0.0:
        raise DomainError("flux grid must start at 0")
    steps = np.diff(grid)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise DomainError("flux grid must be uniform and increasing")
    if shift < 0:
        raise DomainError("shift must be non-negative")
    n = len(grid) - 1
    g = np.array([flux_rhs(t, init, params) for t in grid])
    cells = np.zeros(n)
    residuals = np.zeros(n + 1)
    betas = np.array([boundary_exponent(t, params) for t in grid[1:]])
    diag = np.zeros(n)
    zeroed = []
    for i in range(1, n + 1):
        weights, _, beta = _weights_at(i, grid, params)
        history = float(weights[: i - 1] @ cells[: i - 1])
        if beta >= 1.0:
            resid = g[i] + history
            if abs(resid) > singular_tolerance * (1.0 + abs(g[i])):
                raise NonIntegrableKernelError(
                    f"kernel exponent {beta:.4g} >= 1 at t={grid[i]!r} and the equation "
                    f"is not met with zero flux (residual {resid:.3g})"
                )
            cells[i - 1] = 0.0
            residuals[i] = resid
            zeroed.append(i)
            continue
        diag[i - 1] = weights[i - 1]
        cells[i - 1] = (-g[i] - history) / (weights[i - 1] + shift)
        residuals[i] = g[i] + history + weights[i - 1] * cells[i - 1]
    if not np.all(np.isfinite(cells)):
        raise IllConditionedError("flux solve produced non-finite values",
                                  {"diagonal": diag.tolist()})
    nodes = np.empty(n + 1)
    if n == 1:
        nodes[:] = cells[0]
    else:
        nodes[1:-1] = 0.5 * (cells[:-1] + cells[1:])
        nodes[0] = 1.5 * cells[0] - 0.5 * cells[1]
        nodes[-1] = 1.5 * cells[-1] - 0.5 * cells[-2]
    active = diag[diag > 0]
    return FluxFunction(
        grid=grid,
        cell_values=cells,
        values=nodes,
        rhs=g,
        residuals=residuals,
        params=params,
        shift=float(shift),
        diagnostics={
            "shift": float(shift),
            "zero_flux_nodes": zeroed,
            "max_exponent": float(betas.max()),
            "diagonal_ratio": float(active.max() / active.min()) if len(active) else 1.0,
        },
    )


def _remainder_solution(t, params):
    """Dense solution of ``R' = kernel_remainder`` on ``[0, t]`` by an explicit RK stepper."""
    sol = solve_ivp(lambda m, y: kernel_remainder(np.array([m]), t, params),
                    (0.0, t), [0.0], method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    if not sol.success:  # pragma: no cover
        raise IllConditionedError("remainder integration failed", {"message": sol.message})
    return sol.sol


def lemma2_residual(flux: FluxFunction, t, init: InitialDistribution, params: FpkParams):
    """``|g(t) + int_0^t K(t, tau) f(tau) dtau|`` by quadrature independent of the solver.

    The kernel remainder comes from ODE integration and each flux cell is
    integrated by QUADPACK, with the algebraic weight on the cell touching ``t``.
    """
    if not 0 <= t <= flux.grid[-1] * (1 + 1e-12):
        raise DomainError("t outside the flux grid")
    if t == 0:
        return 0.0
    g = flux_rhs(t, init, params)
    beta = boundary_exponent(t, params)
    if params.c == 0.0:
        return abs(g + flux.integral(0.0, t))
    rem = _remainder_solution(t, params)
    edges = flux.grid[flux.grid < t]
    edges = np.append(edges, t)
    total = 0.0
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        f_val = float(flux(0.5 * (lo + hi)))
        if f_val == 0.0:
            continue
        if j < len(edges) - 2:
            val, _ = quad(lambda x: (t / (t - x)) ** beta * math.exp(rem(x)[0]), lo, hi,
                          epsabs=1e-14, epsrel=1e-12, limit=200)
        else:
            if beta >= 1.0:
                raise NonIntegrableKernelError(f"kernel exponent {beta:.4g} >= 1 at t={t!r}")
            val, _ = quad(lambda x: t ** beta * math.exp(rem(x)[0]), lo, hi, weight="alg",
                          wvar=(0.0, -beta), epsabs=1e-14, epsrel=1e-12, limit=200)
        total += f_val * val
    return abs(g + total)


def boundary_limit(t, init: InitialDistribution, params: FpkParams, tol=1e-12):
    """Coefficient of the density's leading behaviour at the origin (reflecting mode).

    For large s the transform behaves like ``L s^(-beta)``, hence
    ``u(t, x) ~ L x^(beta-1) / Gamma(beta)`` as ``x -> 0`` and ``L`` is the
    boundary value itself when ``beta = 1``. With ``c = 0`` it reduces to
    ``pi(-1 / psi(t))``, the mass sitting at the origin. Returns
    ``L = (a t^(2v) )^(-beta) exp(-R(t)) pi(-1 / psi(t))``.
    """
    if not t > 0:
        raise DomainError("boundary limit needs t > 0")
    g = flux_rhs(t, init, params)
    if params.c == 0.0:
        return g
    beta = boundary_exponent(t, params)
    slope = params.diffusion_coefficient(t)
    seeds = np.unique(np.concatenate([[0.0, t], graded_points(0.0, t, "left", 12),
                                      graded_points(0.0, t, "right", 4)]))
    res = gauss_kronrod(lambda m: kernel_remainder(m, t, params), seeds, tol=tol)
    remainder = float(np.real(res.value[0]))
    return (slope * t) ** (-beta) * math.exp(-remainder) * g
