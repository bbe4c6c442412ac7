# tests/test_multipole.py
import math

import numpy as np
import pytest
from scipy.special import binom

from src.asymptotics.multipole import (
    calibrated_kappa_b,
    contraction_estimate,
    direct_multipole_sum,
    expansion_error,
    multipole_coeffs,
    multipole_field,
    scaled,
    taylor_coefficients,
    truncated_kernel,
)
from src.discretization.grid import SampledFunction, make_tensor_grid
from src.errors import CoincidentPoints, GridMismatch, InvalidRange
from src.potentials.decomposition import moments


# -----------------------
# Coefficients
# -----------------------
def test_coefficients_in_three_dimensions():
    assert taylor_coefficients(2, 3) == pytest.approx((1.0, -0.5, 0.375))
    c = multipole_coeffs(2, 3).c
    expected = {(0, 0): 1.0, (1, 0): 1.0, (1, 1): -0.5, (2, 0): 1.5, (2, 1): -1.5, (2, 2): 0.375}
    assert c == pytest.approx(expected)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_taylor_coefficients_match_binomial_series(n):
    m = (n - 2) / 2.0
    for k, d in enumerate(taylor_coefficients(2, n)):
        falling = math.prod(-m - i for i in range(k)) / math.factorial(k)
        assert d == pytest.approx(falling)
        assert d == pytest.approx((-1) ** k * binom(m + k - 1, k))


def test_coefficients_in_four_dimensions():
    assert taylor_coefficients(2, 4) == pytest.approx((1.0, -1.0, 1.0))
    c = multipole_coeffs(2, 4).c
    expected = {(0, 0): 1.0, (1, 0): 2.0, (1, 1): -1.0, (2, 0): 4.0, (2, 1): -4.0, (2, 2): 1.0}
    assert c == pytest.approx(expected)


def test_terms_respect_the_order():
    exp = multipole_coeffs(1, 4)
    assert [(k, l) for k, l, _ in exp.terms()] == [(0, 0), (1, 0)]
    with pytest.raises(InvalidRange):
        multipole_coeffs(3, 3)
    with pytest.raises(InvalidRange):
        multipole_coeffs(1, 2)


# -----------------------
# Expansion error
# -----------------------
def test_expansion_error_example():
    lhs, rhs = expansion_error([10.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1, 3, kappa_b=1.0)
    assert lhs == pytest.approx(1.0 / 9.0 - 0.11)
    assert lhs / rhs == pytest.approx(0.5)


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("N", [0, 1, 2])
def test_expansion_is_exact_at_the_origin(N, n):
    x = np.zeros(n)
    x[1] = 7.0
    lhs, _ = expansion_error(x, np.zeros(n), N, n)
    assert lhs == 0.0


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("N", [0, 1, 2])
def test_expansion_bound_on_random_pairs(N, n, rng):
    for _ in range(200):
        x = rng.standard_normal(n)
        x *= rng.uniform(0.5, 20.0) / np.linalg.norm(x)
        y = rng.standard_normal(n)
        y *= np.linalg.norm(x) * 10 ** rng.uniform(-2, 2) / np.linalg.norm(y)
        if np.linalg.norm(x - y) < 1e-3 * np.linalg.norm(x):
            continue
        lhs, rhs = expansion_error(x, y, N, n)
        assert lhs <= rhs


def test_expansion_error_preconditions():
    with pytest.raises(CoincidentPoints):
        expansion_error(np.zeros(3), np.ones(3), 1, 3)
    with pytest.raises(CoincidentPoints):
        expansion_error(np.ones(3), np.ones(3), 1, 3)


def test_kappa_b_is_cached():
    first = calibrated_kappa_b(2, 3)
    hits = calibrated_kappa_b.cache_info().hits
    assert calibrated_kappa_b(2, 3) == first
    assert calibrated_kappa_b.cache_info().hits == hits + 1
    assert first > 0


# -----------------------
# Far field from moments
# -----------------------
def test_truncated_kernel_of_order_zero():
    y = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    assert truncated_kernel(np.array([0.0, 4.0, 0.0]), y, 0, 3) == pytest.approx([0.25, 0.25])


@pytest.mark.parametrize("N", [0, 1, 2])
def test_multipole_field_matches_direct_sum(N):
    grid = make_tensor_grid(0.2, 1.0, 3)
    x = grid.points
    gauss = np.exp(-np.sum(x ** 2, axis=1))
    V = SampledFunction(grid, -gauss * (1.0 + x[:, 0] + 0.5 * x[:, 1] * x[:, 2]))
    psi = SampledFunction(grid, 1.0 + 0.3 * x[:, 2] - 0.2 * x[:, 0] ** 2)
    m = moments(V, psi, 2)
    target = np.array([3.0, 1.0, -2.0])
    assert multipole_field(m, target, N, 3) == pytest.approx(direct_multipole_sum(V, psi, target, N), rel=1e-10)


def test_multipole_field_preconditions(radial3):
    m = {(0, 0, 0): 1.0}
    with pytest.raises(CoincidentPoints):
        multipole_field(m, np.zeros(3), 0, 3)
    with pytest.raises(GridMismatch):
        direct_multipole_sum(radial3.V, radial3.state.psi, np.ones(3), 0)


# -----------------------
# Decay operator
# -----------------------
@pytest.mark.parametrize("N", [0, 1])
def test_decay_operator_contracts_and_is_linear(radial3, N):
    dec = radial3.dec
    R = dec.support_radius
    for alpha in (N + 1, N + 2):
        estimate = contraction_estimate(dec, alpha, N, R, trial_count=4)
        assert 0 < estimate < 1
        doubled = contraction_estimate(scaled(dec, 2.0), alpha, N, R, trial_count=4)
        assert doubled / estimate == pytest.approx(2.0, rel=1e-9)


def test_decay_operator_preconditions(radial3):
    dec = radial3.dec
    with pytest.raises(InvalidRange):
        contraction_estimate(dec, 1.5, 0, dec.support_radius)
    with pytest.raises(InvalidRange):
        contraction_estimate(dec, 1.0, 0, 0.5 * dec.support_radius)
    with pytest.raises(InvalidRange):
        contraction_estimate(dec, 1.0, 0, dec.support_radius, trial_count=0)
    assert math.isclose(scaled(dec, 0.0).W.values.max(), 0.0)
