import math

import numpy as np
import pytest

from fbmfp.cir import CirParams, cir_transition_density, map_cir_to_fpk
from fbmfp.errors import DomainError, UnsupportedRegimeError
from fbmfp.laplace_domain import InitialDistribution
from fbmfp.oracles import FbmSimConfig, feller_v_half_density, ks_statistic, simulate_fbm_paths
from fbmfp.solver import density_curve
from fbmfp.validation import density_cdf


def test_mapping_square_root_case():
    params, xi, t = map_cir_to_fpk(CirParams(0.5, 0.2, 0.05, 0.0, 1.3, 2.0))
    assert params.a == pytest.approx(0.02)
    assert params.v == 0.5
    assert params.b == pytest.approx(0.03)
    assert params.c == 0.0
    assert (xi, t) == (1.3, 2.0)


def test_mapping_persistent_case():
    params, _, _ = map_cir_to_fpk(CirParams(0.7, 0.1, 0.05, 0.01, 1.0, 1.0))
    assert params.a == pytest.approx(0.007)
    assert params.v == 0.7
    assert params.b == pytest.approx(0.043)
    assert params.c == -0.01


def test_negative_slope_rejected():
    with pytest.raises(UnsupportedRegimeError):
        map_cir_to_fpk(CirParams(0.7, 0.5, 0.05, 0.0, 1.0, 1.0))


@pytest.mark.parametrize("kwargs", [{"hurst": 1.0}, {"sigma": 0.0}, {"s_t": -1.0},
                                    {"delta_t": 0.0}, {"rate": math.nan}])
def test_market_validation(kwargs):
    base = dict(hurst=0.5, sigma=0.2, rate=0.05, dividend_h=0.0, s_t=1.0, delta_t=1.0)
    base.update(kwargs)
    with pytest.raises(DomainError):
        CirParams(**base)


def test_brownian_case_matches_classical_law():
    # h < 0 keeps 2c/a away from the zero-degree boundary case
    p = CirParams(0.5, 0.4, 0.1, -0.05, 1.0, 1.0)
    params, xi, t = map_cir_to_fpk(p)
    x = np.geomspace(0.2, 3.0, 80)
    curve = cir_transition_density(p, x)
    ref = feller_v_half_density(t, x, xi, params)
    keep = ref > 1e-2 * ref.max()
    assert np.max(np.abs(curve.u[keep] - ref[keep]) / ref[keep]) <= 1e-3


def test_delegates_to_solver_exactly():
    p = CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0)
    params, xi, t = map_cir_to_fpk(p)
    x = np.linspace(0.8, 1.2, 9)
    mine = cir_transition_density(p, x).u
    direct = density_curve(t, x, InitialDistribution.point_mass(xi), "reflecting", params).u
    np.testing.assert_allclose(mine, direct, rtol=1e-12, atol=0)


@pytest.fixture(scope="module")
def persistent_curve():
    return cir_transition_density(CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0))


def test_normalisation(persistent_curve):
    assert not persistent_curve.failures
    assert abs(persistent_curve.diagnostics["normalization"] - 1.0) <= 5e-3


def test_monte_carlo_agreement(persistent_curve):
    params, xi, t = map_cir_to_fpk(CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0))
    samples = simulate_fbm_paths(FbmSimConfig(0.7, 50_000, 128, t, xi, seed=123), params)
    assert ks_statistic(samples, density_cdf(persistent_curve)) <= 0.03


def test_tail_points_flagged_not_failed(persistent_curve):
    # rounding on the contour limits the far tail to about 1e-5 absolute
    flagged = [i for i, f in enumerate(persistent_curve.flags) if "low-accuracy" in f]
    assert flagged
    assert np.all(persistent_curve.x_grid[flagged] > 2.0)
