import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmfp.cir import CirParams, map_cir_to_fpk
from fbmfp.errors import DomainError, InversionError
from fbmfp.inversion import (InversionConfig, invert, invert_many, invert_stehfest,
                             invert_talbot, stehfest_weights, talbot_nodes)
from fbmfp.laplace_domain import InitialDistribution, omega_transform
from fbmfp.validation import INVERSION_PAIRS

XS = np.geomspace(0.1, 10.0, 31)


def test_talbot_unit_step_and_ramp():
    assert invert_talbot(lambda s: 1.0 / s, 1.0) == pytest.approx(1.0, abs=1e-10)
    assert invert_talbot(lambda s: 1.0 / s ** 2, 2.5) == pytest.approx(2.5, rel=1e-10)


def test_talbot_exponential_pair():
    assert abs(invert_talbot(lambda s: 1.0 / (s + 1.0), 1.0) - math.exp(-1.0)) <= 1e-8


def test_stehfest_examples():
    # exact in rational arithmetic; the weights at 16 terms reach 1e8, so about
    # eight digits survive the cancellation
    assert invert_stehfest(lambda s: 1.0 / s, 3.0) == pytest.approx(1.0, abs=1e-6)
    assert invert_stehfest(lambda s: 1.0 / s ** 2, 0.5) == pytest.approx(0.5, rel=1e-6)
    assert abs(invert_stehfest(lambda s: 1.0 / (s + 1.0), 1.0, 16) - math.exp(-1.0)) <= 1e-6


@pytest.mark.parametrize("name", sorted(INVERSION_PAIRS))
def test_talbot_battery(name):
    transform, exact = INVERSION_PAIRS[name]
    values = np.array([r.value for r in invert_many(transform, XS)])
    np.testing.assert_allclose(values, exact(XS), rtol=1e-6)


@pytest.mark.parametrize("n", [2, 4, 8, 12, 16, 20])
def test_stehfest_weight_identities(n):
    # the weights annihilate constants in s and reproduce 1/s exactly
    v = stehfest_weights(n)
    scale = np.max(np.abs(v))
    assert abs(v.sum()) <= 1e-15 * scale * n
    assert abs(np.sum(v / np.arange(1, n + 1)) - 1.0) <= 1e-15 * scale * n


def test_stehfest_weights_small_case_exact():
    # N = 2: V_1 = 2, V_2 = -2
    np.testing.assert_array_equal(stehfest_weights(2), [2.0, -2.0])
    assert Fraction(stehfest_weights(4)[0]).limit_denominator(10) == -2


def test_talbot_nodes_shape():
    s, w = talbot_nodes(1.0, 32)
    assert s.shape == w.shape == (32,)
    assert s[0].imag == 0.0 and s[0].real > 0


@pytest.mark.parametrize("kwargs", [
    {"method": "euler"},
    {"talbot_nodes": 8},
    {"talbot_nodes": 32, "talbot_max_nodes": 40},
    {"stehfest_terms": 15},
    {"stehfest_terms": 22},
    {"cross_check_tolerance": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        InversionConfig(**kwargs)


def test_stehfest_rejects_many_terms():
    with pytest.raises(DomainError):
        invert_stehfest(lambda s: 1.0 / s, 1.0, 22)


def test_delayed_step_past_the_delay():
    r = invert(lambda s: np.exp(-s) / s, 2.0)
    assert r.value == pytest.approx(1.0, abs=1e-8)


def test_delayed_step_before_the_delay_is_flagged():
    # the contour terms grow without bound before the delay: Talbot reports failure
    transform = lambda s: np.exp(-s) / s  # noqa: E731
    with pytest.raises(InversionError):
        invert(transform, 0.5)
    r = invert(transform, 0.5, InversionConfig("both"))
    assert "talbot-failed" in r.flags
    assert abs(r.value) < 0.05


def test_both_methods_record_discrepancy():
    r = invert(lambda s: 1.0 / (s + 1.0), 1.0, InversionConfig("both"))
    assert set(r.method_values) == {"talbot", "stehfest"}
    a, b = r.method_values["talbot"], r.method_values["stehfest"]
    assert r.discrepancy == pytest.approx(abs(a - b) / max(abs(a), abs(b)))
    assert "discrepancy" not in r.flags
    tight = invert(lambda s: 1.0 / (s + 1.0), 1.0, InversionConfig("both", cross_check_tolerance=1e-12))
    assert "discrepancy" in tight.flags


def test_negative_values_flagged():
    r = invert(lambda s: -1.0 / (s + 1.0), 1.0)
    assert "negative" in r.flags


def test_x_must_be_positive():
    with pytest.raises(DomainError):
        invert_talbot(lambda s: 1.0 / s, 0.0)


def test_adaptive_nodes_resolve_concentrated_law():
    # a narrow transition law puts a singularity of the transform close to the
    # 32-node contour; the fixed sum is useless there and escalation fixes it
    params, xi, t = map_cir_to_fpk(CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0))
    transform = omega_transform(t, InitialDistribution.point_mass(xi), params)
    fixed = invert_talbot(transform, 1.0, 32)
    reference = invert_talbot(transform, 1.0, 96)
    r = invert(transform, 1.0)
    assert abs(fixed - reference) > 1.0
    assert r.details["talbot_nodes"] > 32
    assert r.value == pytest.approx(reference, rel=1e-7)
    assert not {"talbot-unresolved", "talbot-tail"} & set(r.flags)


def test_node_cap_reports_unresolved():
    params, xi, t = map_cir_to_fpk(CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0))
    transform = omega_transform(t, InitialDistribution.point_mass(xi), params)
    r = invert(transform, 1.0, InversionConfig("talbot", 32, 48))
    assert "talbot-unresolved" in r.flags


@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_linearity(alpha, beta, x):
    f = lambda s: 1.0 / (s + 1.0)  # noqa: E731
    g = lambda s: 1.0 / (s ** 2 + 1.0)  # noqa: E731
    combined = invert(lambda s: alpha * f(s) + beta * g(s), x).value
    parts = alpha * invert(f, x).value + beta * invert(g, x).value
    assert abs(combined - parts) <= 1e-9 * (1.0 + abs(alpha) + abs(beta))


def test_overflowing_sums_keep_last_finite_estimate():
    # far in the tail the 48-80 node sums overflow; the 32-node sum is kept
    params, xi, t = map_cir_to_fpk(CirParams(0.7, 0.1, 0.05, -0.01, 1.0, 1.0))
    transform = omega_transform(t, InitialDistribution.point_mass(xi), params)
    r = invert(transform, 4.8)
    assert abs(r.value) <= 1e-9
    assert r.details["rounding_error"] <= 1e-9
    assert r.details["talbot_nodes"] == 32
