import math

import numpy as np
import pytest

from fbmfp.errors import DomainError
from fbmfp.inversion import InversionConfig
from fbmfp.laplace_domain import InitialDistribution
from fbmfp.oracles import feller_v_half_density
from fbmfp.params import FpkParams
from fbmfp.solver import (DensityCurve, default_grid, density_curve, distribution_function,
                          expected_mean, moment_check)

POINT = InitialDistribution.point_mass(1.0)
MAIN = FpkParams(1.0, 0.5, 0.3, 0.7)
SQRT = FpkParams(1.0, 0.5, 0.5, 0.5)


@pytest.fixture(scope="module")
def main_curve():
    return density_curve(1.0, None, POINT, "reflecting", MAIN)


def test_default_grid_layout():
    x = default_grid(1.0, POINT, MAIN)
    assert len(x) == 256
    assert x[0] == pytest.approx(1.0 / 50.0)
    assert x[-1] == pytest.approx(8.0 * expected_mean(1.0, 1.0, MAIN))
    assert np.allclose(np.diff(np.log(x)), np.log(x[1] / x[0]))


def test_expected_mean_values():
    assert expected_mean(1.0, 1.0, MAIN) == pytest.approx(math.exp(0.5) + 0.6 * math.expm1(0.5))
    assert expected_mean(2.0, 1.5, FpkParams(1.0, 0.0, 0.25, 0.7)) == pytest.approx(2.0)


def test_main_curve_diagnostics(main_curve):
    d = main_curve.diagnostics
    assert not main_curve.failures
    assert abs(d["normalization"] - 1.0) <= 5e-3
    assert d["min_value"] >= -1e-6 * d["peak"]
    assert 0 < d["boundary_exponent"] < 1


def test_moment_matches_mean(main_curve):
    report = moment_check(main_curve, MAIN)
    assert report["expected"] == pytest.approx(2.0377, abs=5e-4)
    assert report["relative_deviation"] <= 5e-3


def test_driftless_moment():
    p = FpkParams(1.0, 0.0, 0.0, 0.7)
    curve = density_curve(0.5, np.geomspace(1e-3, 8.0, 400), POINT, "reflecting", p)
    report = moment_check(curve, p)
    assert report["expected"] == 1.0
    # the law has an atom-like spike at the origin (c = 0), so the head mass is large
    assert report["mean"] == pytest.approx(1.0, rel=5e-3)


def test_moment_warns_on_edge_mass():
    curve = density_curve(1.0, np.linspace(0.5, 2.0, 40), POINT, "reflecting", MAIN)
    assert moment_check(curve, MAIN)["warnings"]


@pytest.mark.parametrize("t", [0.25, 0.5, 2.0])
def test_normalization_over_time(t):
    curve = density_curve(t, None, POINT, "reflecting", MAIN)
    assert abs(curve.diagnostics["normalization"] - 1.0) <= 5e-3


def test_square_root_case_matches_closed_form():
    x = np.geomspace(0.02, 12.0, 120)
    curve = density_curve(1.0, x, POINT, "reflecting", SQRT)
    ref = feller_v_half_density(1.0, x, 1.0, SQRT)
    keep = ref > 1e-2 * ref.max()
    assert np.max(np.abs(curve.u[keep] - ref[keep]) / ref[keep]) <= 1e-3


def test_distribution_function_limits():
    cdf = distribution_function(1.0, np.array([1e-3, 30.0]), POINT, MAIN)
    # the density behaves like x^(beta - 1) with beta = 0.3 near the origin
    assert 0 < cdf[0] < distribution_function(1.0, 0.1, POINT, MAIN)
    assert cdf[1] == pytest.approx(1.0, abs=1e-6)


def test_both_methods_populate_columns():
    x = np.array([1.0, 2.0, 3.0])
    curve = density_curve(1.0, x, POINT, "reflecting", SQRT, InversionConfig("both"))
    assert set(curve.method_values) == {"talbot", "stehfest"}
    assert np.all(np.isfinite(curve.discrepancy))


def test_failed_points_are_marked_not_interpolated():
    # a point mass whose transform is undefined off a thin strip of the real axis
    def transform(z):
        z = np.asarray(z, dtype=complex)
        return np.where(np.abs(z.imag) > 0.1, np.nan, np.exp(-z))

    init = InitialDistribution.general(transform, abscissa=-np.inf)
    x = np.array([0.01, 0.5, 1.0, 2.0, 4.0])
    curve = density_curve(1.0, x, init, "reflecting", MAIN)
    assert sorted(curve.failures) == [3, 4]
    assert all(type(i) is int for i in curve.failures)
    assert np.isnan(curve.u[3:]).all() and np.isfinite(curve.u[:3]).all()
    assert "failed" in curve.flags[4]
    assert math.isnan(curve.diagnostics["normalization"])


def test_flux_mode_runs():
    p = FpkParams(1.0, 0.5, 0.2, 0.7)
    curve = density_curve(1.0, np.linspace(0.2, 4.0, 12), POINT, "lemma2-flux", p, flux_cells=32)
    assert curve.mode == "lemma2-flux"
    assert curve.diagnostics["flux"]["max_exponent"] > 0
    with pytest.raises(DomainError):
        moment_check(curve, p)


@pytest.mark.parametrize("x", [np.array([]), np.array([0.0, 1.0]), np.array([2.0, 1.0])])
def test_grid_validation(x):
    with pytest.raises(DomainError):
        density_curve(1.0, x, POINT, "reflecting", MAIN)


def test_time_and_mode_validation():
    with pytest.raises(DomainError):
        density_curve(0.0, None, POINT, "reflecting", MAIN)
    with pytest.raises(DomainError):
        density_curve(1.0, None, POINT, "absorbing", MAIN)


def test_curve_rejects_unsorted_grid():
    with pytest.raises(DomainError):
        DensityCurve(1.0, np.array([2.0, 1.0]), np.zeros(2), 1.0, "reflecting", MAIN,
                     np.zeros(2), ((), ()))
