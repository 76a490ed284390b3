"""The ten acceptance criteria at full size and their stated tolerances.

Each criterion prints one ``[PASS]``/``[FAIL]`` line in the terminal summary.
Three parts cannot be met and are marked as strict expected failures, so an
unexpected pass turns the run red:

* criterion 4, Stehfest: no even term count up to 20 reaches 1e-6 on all four
  pairs in double precision;
* criterion 6: full-truncation Euler paths leave an atom at zero whose mass
  alone exceeds the KS bound at v = 0.3, and v = 0.7 also misses it;
* criterion 9, second derivative: ``d^2/ds^2 [s e^(bt) / (1 - s e^(bt) psi)]``
  equals ``2 e^(2bt) psi / (1 - s e^(bt) psi)^3``, negative whenever psi < 0.
"""
import functools

import pytest

from fbmfp.validation import CHECKS

pytestmark = pytest.mark.slow

RUNTIME_LIMITS = {1: 30, 2: 30, 3: 10, 4: 5, 5: 120, 6: 600, 7: 300, 8: 60, 9: 30, 10: 60}


@functools.lru_cache(maxsize=None)
def _run(number):
    return CHECKS[number](fast=False)


@pytest.fixture
def criterion(acceptance_lines):
    def get(number):
        result = _run(number)
        acceptance_lines[number] = result.line() + f" [{result.wall_time:.1f} s]"
        print(acceptance_lines[number])
        assert result.wall_time < RUNTIME_LIMITS[number]
        return result
    return get


@pytest.mark.parametrize("number", [1, 2, 3, 5, 7, 8, 10])
def test_criterion(criterion, number):
    result = criterion(number)
    assert all(result.parts.values()), result.line()
    assert result.passed, result.line()


def test_criterion_4_talbot(criterion):
    result = criterion(4)
    assert result.measured["talbot_max_relative"] <= 1e-6


@pytest.mark.xfail(strict=True, reason="Stehfest in double precision misses 1e-6 on the battery")
def test_criterion_4_stehfest(criterion):
    result = criterion(4)
    assert result.measured["stehfest_max_relative"] <= 1e-6


@pytest.mark.xfail(strict=True, reason="Euler atom at zero and the Wick drift exceed the KS bound")
def test_criterion_6(criterion):
    result = criterion(6)
    assert result.passed, result.line()


def test_criterion_6_diagnostics_reported(criterion):
    result = criterion(6)
    for tag in ("v=0.3", "v=0.7"):
        runs = result.details[tag]["runs"]
        for scheme in ("wick-euler", "gaussian-martingale"):
            assert {"ks", "sample_mean", "zero_fraction"} <= set(runs[scheme])


def test_criterion_9_density_and_first_derivative(criterion):
    result = criterion(9)
    assert result.parts["density"]
    assert result.parts["first-derivative"]


@pytest.mark.xfail(strict=True, reason="the second s-derivative of the argument is negative")
def test_criterion_9_second_derivative(criterion):
    result = criterion(9)
    assert result.measured["min_second_derivative"] >= -1e-10
