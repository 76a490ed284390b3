import math

import numpy as np
import pytest
from scipy.integrate import quad

from fbmfp.errors import DomainError, NonIntegrableKernelError
from fbmfp.flux import (boundary_exponent, boundary_limit, flux_rhs, kernel_remainder,
                        lemma2_residual, solve_flux)
from fbmfp.laplace_domain import InitialDistribution
from fbmfp.params import FpkParams
from fbmfp.special_fn import delta, psi

POINT = InitialDistribution.point_mass(1.0)


def _g_closed(t, p):
    # point mass at 1: g = exp(1 / psi)
    return math.exp(1.0 / psi(t, p))


def _g_derivative_closed(t, p):
    dpsi = -p.a * t ** (2 * p.v - 1) * math.exp(-p.b * t)
    ps = psi(t, p)
    return _g_closed(t, p) * (-dpsi / ps ** 2)


def test_rhs_is_initial_transform_at_minus_inverse_psi():
    p = FpkParams(1.0, 0.5, 0.3, 0.7)
    assert flux_rhs(0.0, POINT, p) == 0.0
    assert flux_rhs(0.8, POINT, p) == pytest.approx(_g_closed(0.8, p), rel=1e-13)


def test_boundary_exponent():
    p = FpkParams(2.0, 0.5, 0.3, 0.7)
    assert boundary_exponent(1.5, p) == pytest.approx(0.3 / (2.0 * 1.5 ** 0.4))


def test_kernel_remainder_against_direct_difference():
    p = FpkParams(1.0, 0.5, 0.4, 0.7)
    t = 1.0
    beta = boundary_exponent(t, p)
    mu = np.array([0.1, 0.4, 0.6, 0.9])
    direct = p.c / delta(mu, t, p) - beta / (t - mu)
    np.testing.assert_allclose(kernel_remainder(mu, t, p), direct, rtol=1e-8)
    near = kernel_remainder(np.array([t * (1 - 1e-7)]), t, p)
    assert np.isfinite(near).all()


def test_flux_without_intercept_is_minus_rhs_derivative():
    p = FpkParams(1.0, 0.5, 0.0, 0.7)
    grid = np.linspace(0.0, 1.0, 201)
    flux = solve_flux(grid, POINT, p)
    ref = np.array([-_g_derivative_closed(t, p) if t > 0 else 0.0 for t in grid])
    assert np.max(np.abs(flux.values - ref)) <= 1e-4
    # cell averages integrate exactly to the rhs increment
    assert flux.integral(0.0, 1.0) == pytest.approx(-_g_closed(1.0, p), rel=1e-10)


@pytest.mark.parametrize("pset", [(1.0, 0.5, 0.2, 0.7), (1.0, 0.5, 0.5, 0.5)])
def test_independent_residual_small(pset):
    p = FpkParams(*pset)
    grid = np.linspace(0.0, 1.0, 33)
    flux = solve_flux(grid, POINT, p)
    for t, g in zip(grid[::4], flux.rhs[::4]):
        assert lemma2_residual(flux, t, POINT, p) <= 1e-6 * (1 + abs(g))


def test_residual_detects_perturbed_flux():
    p = FpkParams(1.0, 0.5, 0.2, 0.7)
    grid = np.linspace(0.0, 1.0, 33)
    flux = solve_flux(grid, POINT, p)
    bad = flux.__class__(flux.grid, flux.cell_values * 1.01, flux.values, flux.rhs,
                         flux.residuals, flux.params)
    assert lemma2_residual(bad, 1.0, POINT, p) > 1e-4


def test_zero_flux_where_kernel_not_integrable():
    # beta >= 1 for t below about 3e-3, where the rhs is exp(-4000) = 0
    p = FpkParams(1.0, 0.5, 0.1, 0.7)
    flux = solve_flux(np.linspace(0.0, 1.0, 401), POINT, p)
    assert flux.diagnostics["zero_flux_nodes"] == [1]
    assert flux.cell_values[0] == 0.0


def test_non_integrable_kernel_with_live_rhs_raises():
    # beta = 1.14 at t = 0.2 while the rhs there is about 1e-6
    p = FpkParams(1.0, 0.5, 0.6, 0.7)
    with pytest.raises(NonIntegrableKernelError):
        solve_flux(np.linspace(0.0, 1.0, 6), POINT, p)


@pytest.mark.parametrize("grid", [[0.0], [0.1, 0.5, 1.0], [0.0, 0.2, 1.0]])
def test_grid_validation(grid):
    with pytest.raises(DomainError):
        solve_flux(np.array(grid), POINT, FpkParams(1.0, 0.5, 0.2, 0.7))


def test_boundary_limit_without_intercept_is_rhs():
    p = FpkParams(1.0, 0.5, 0.0, 0.7)
    assert boundary_limit(1.0, POINT, p) == pytest.approx(_g_closed(1.0, p), rel=1e-13)


def test_boundary_limit_square_root_closed_form():
    # at v = 1/2 and c = a the transform is exp(-e^{bt} s / (1 + s k)) / (1 + s k),
    # so the density at the origin is exp(-e^{bt} / k) / k
    p = FpkParams(1.0, 0.5, 1.0, 0.5)
    t = 1.0
    k = p.a * math.expm1(p.b * t) / p.b
    assert boundary_limit(t, POINT, p) == pytest.approx(math.exp(-math.exp(p.b * t) / k) / k,
                                                        rel=1e-9)


def test_boundary_limit_general_exponent_closed_form():
    # v = 1/2, c = 2a: beta = 2 and L = k^-2 exp(-e^{bt}/k)
    p = FpkParams(0.5, 0.3, 1.0, 0.5)
    t = 0.7
    k = p.a * math.expm1(p.b * t) / p.b
    ref = math.exp(-math.exp(p.b * t) / k) / k ** 2
    assert boundary_limit(t, POINT, p) == pytest.approx(ref, rel=1e-9)


def test_boundary_limit_needs_positive_time():
    with pytest.raises(DomainError):
        boundary_limit(0.0, POINT, FpkParams(1.0, 0.5, 1.0, 0.7))


def test_zero_flux_leaves_rhs_as_residual():
    # reflecting data (f = 0) does not satisfy the flux condition for a point mass
    p = FpkParams(1.0, 0.5, 0.0, 0.7)
    grid = np.linspace(0.0, 1.0, 11)
    flux = solve_flux(grid, POINT, p)
    zero = flux.__class__(grid, np.zeros(10), np.zeros(11), flux.rhs, flux.residuals, p)
    assert lemma2_residual(zero, 1.0, POINT, p) == pytest.approx(_g_closed(1.0, p), rel=1e-13)
    assert lemma2_residual(flux, 0.0, POINT, p) == 0.0


def test_boundary_limit_driftless_example():
    # b = 0, c = 0, a = 1, v = 1/2, t = 2: psi = -2 and the limit is exp(-1/2)
    p = FpkParams(1.0, 0.0, 0.0, 0.5)
    assert boundary_limit(2.0, POINT, p) == pytest.approx(0.6065306597, rel=1e-9)
