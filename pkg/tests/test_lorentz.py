# tests/test_lorentz.py
import math

import numpy as np
import pytest

from src.discretization.grid import SampledFunction, make_log_radial_grid, make_tensor_grid
from src.errors import DivergentNorm, ExponentMismatch, InvalidRange
from src.lorentz.quasinorm import (
    LorentzIndex,
    decreasing_rearrangement,
    distribution_function,
    holder_constant,
    holder_product_bound,
    inclusion_constant,
    indicator_norm,
    interpolation_membership,
    kernel_weak_norm,
    lp_norm,
    quasi_triangle_constant,
    quasinorm,
)

BALL3 = 4.0 * math.pi / 3.0


@pytest.fixture(scope="module")
def fine_grid():
    return make_log_radial_grid(1e-3, 1e3, 1400, 3)


@pytest.fixture(scope="module")
def box():
    return make_tensor_grid(0.25, 2.0, 3)


def _interior_random(box, rng, lo=0.5, hi=1.5):
    """Random positive values, zero on the boundary layer of the box."""
    values = rng.uniform(lo, hi, box.size)
    inside = np.all(np.abs(box.points) < box.extent - 1e-9, axis=1)
    return SampledFunction(box, np.where(inside, values, 0.0))


# -----------------------
# Distribution function and rearrangement
# -----------------------
def test_distribution_and_rearrangement_on_unit_masses():
    grid = make_tensor_grid(1.0, 1.0, 3)
    f = SampledFunction(grid, np.arange(27, dtype=float))
    assert distribution_function(f, 10.0) == 16.0
    assert distribution_function(f, 26.0) == 0.0
    assert decreasing_rearrangement(f, 5.0) == 21.0
    assert decreasing_rearrangement(f, 4.5) == 22.0
    assert decreasing_rearrangement(f, 100.0) == 0.0


def test_rearrangement_preconditions():
    grid = make_tensor_grid(1.0, 1.0, 3)
    f = SampledFunction(grid, np.ones(27))
    with pytest.raises(InvalidRange):
        distribution_function(f, -1.0)
    with pytest.raises(InvalidRange):
        decreasing_rearrangement(f, 0.0)


# -----------------------
# Analytic constants
# -----------------------
def test_inverse_r_weak_norm(fine_grid):
    f = SampledFunction.radial(fine_grid, 1.0 / fine_grid.nodes)
    value = quasinorm(f, LorentzIndex.of(3, "inf"))
    assert value == pytest.approx(BALL3 ** (1.0 / 3.0), rel=0.01)
    assert value == pytest.approx(1.6119, rel=0.01)
    assert kernel_weak_norm(3) == pytest.approx(1.6119, rel=1e-4)


def test_inverse_r_in_l3_diverges(fine_grid):
    f = SampledFunction.radial(fine_grid, 1.0 / fine_grid.nodes)
    with pytest.raises(DivergentNorm) as info:
        quasinorm(f, LorentzIndex(3.0, 3.0))
    assert info.value.end in ("singular", "tail")


def test_zero_function_has_zero_norms(fine_grid):
    zero = SampledFunction.radial(fine_grid, np.zeros(fine_grid.size))
    for p, q in [(1.5, 1), (3, "inf"), (2, 2)]:
        assert quasinorm(zero, LorentzIndex.of(p, q)) == 0.0


@pytest.mark.parametrize("p, q", [(1.5, 1.0), (2.0, 2.0), (3.0, math.inf), (4.0, 2.0)])
def test_indicator_norms(fine_grid, p, q):
    k = 700
    radius = math.sqrt(fine_grid.nodes[k] * fine_grid.nodes[k + 1])   # a cell edge
    f = SampledFunction.radial(fine_grid, np.where(fine_grid.nodes < radius, 1.0, 0.0))
    idx = LorentzIndex(p, q)
    assert quasinorm(f, idx) == pytest.approx(indicator_norm(BALL3 * radius ** 3, idx), rel=1e-9)


def test_indicator_closed_forms():
    assert indicator_norm(BALL3, LorentzIndex(1.5, 1.0)) == pytest.approx(1.5 * BALL3 ** (2.0 / 3.0))
    for p in (1.5, 2.0, 3.0):
        assert indicator_norm(BALL3, LorentzIndex(p, p)) == pytest.approx(BALL3 ** (1.0 / p))


def test_lp_norm_matches_diagonal_quasinorm(box, rng):
    f = _interior_random(box, rng)
    assert quasinorm(f, LorentzIndex(2.0, 2.0)) == pytest.approx(lp_norm(f, 2.0), rel=1e-12)


def test_norms_are_homogeneous(fine_grid):
    r = fine_grid.nodes
    f = SampledFunction.radial(fine_grid, (1.0 + r ** 2) ** -2)
    for p, q in [(1.5, 1.0), (2.0, 2.0), (3.0, math.inf)]:
        idx = LorentzIndex(p, q)
        assert quasinorm(f * -2.5, idx) == pytest.approx(2.5 * quasinorm(f, idx), rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 2.0, 4.0])
@pytest.mark.parametrize("p, q", [(1.5, 1.0), (2.0, 2.0), (3.0, math.inf)])
def test_dilation_scaling(fine_grid, lam, p, q):
    r = fine_grid.nodes
    base = SampledFunction.radial(fine_grid, (1.0 + r ** 2) ** -2)
    dilated = SampledFunction.radial(fine_grid, (1.0 + (r / lam) ** 2) ** -2)
    idx = LorentzIndex(p, q)
    assert quasinorm(dilated, idx) == pytest.approx(lam ** (3.0 / p) * quasinorm(base, idx), rel=0.01)


# -----------------------
# Bounded functions with a flat top
# -----------------------
def _flat_top(grid):
    """min(1, r^-4): bounded, so only its tail can decide membership."""
    return SampledFunction.radial(grid, np.minimum(1.0, grid.nodes ** -4.0))


@pytest.mark.parametrize("p, q", [(1.0, 1.0), (1.5, 1.0), (2.0, 2.0), (3.0, math.inf)])
def test_flat_top_is_not_singular(fine_grid, p, q):
    assert math.isfinite(quasinorm(_flat_top(fine_grid), LorentzIndex(p, q)))


def test_flat_top_l1_norm(fine_grid):
    f = _flat_top(fine_grid)
    expected = BALL3 + 4.0 * math.pi * (1.0 - 1.0 / fine_grid.r_max)
    assert quasinorm(f, LorentzIndex(1.0, 1.0)) == pytest.approx(expected, rel=2e-3)
    assert quasinorm(f, LorentzIndex(1.0, 1.0)) == pytest.approx(lp_norm(f, 1.0), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_inclusion_ladder(fine_grid, p):
    f = _flat_top(fine_grid)
    strong = quasinorm(f, LorentzIndex(p, 1.0))
    diagonal = quasinorm(f, LorentzIndex(p, p))
    weak = quasinorm(f, LorentzIndex(p, math.inf))
    assert diagonal == pytest.approx(lp_norm(f, p), rel=1e-12)
    assert diagonal <= inclusion_constant(p, 1.0, p) * strong * (1 + 1e-12)
    assert weak <= inclusion_constant(p, 1.0, math.inf) * strong * (1 + 1e-12)
    assert weak <= inclusion_constant(p, p, math.inf) * diagonal * (1 + 1e-12)


def test_single_peak_still_diverges_at_the_singular_end(fine_grid):
    f = SampledFunction.radial(fine_grid, np.where(fine_grid.nodes < 1.0, fine_grid.nodes ** -1.0, 0.0))
    with pytest.raises(DivergentNorm) as info:
        quasinorm(f, LorentzIndex(3.0, 1.0))
    assert info.value.end == "singular"


# -----------------------
# Property suites
# -----------------------
@pytest.mark.parametrize("seed", range(100))
def test_holder_product(box, seed):
    rng = np.random.default_rng(seed)
    p1, p2 = rng.uniform(2.0, 8.0, 2)
    q1, q2 = rng.choice([1.0, 2.0, 4.0, math.inf], 2)
    inv_q = (0.0 if math.isinf(q1) else 1 / q1) + (0.0 if math.isinf(q2) else 1 / q2)
    out = LorentzIndex(1.0 / (1.0 / p1 + 1.0 / p2), math.inf if inv_q == 0 else 1.0 / inv_q)
    f = _interior_random(box, rng)
    g = _interior_random(box, rng)
    lhs, rhs = holder_product_bound(f, g, LorentzIndex(p1, q1), LorentzIndex(p2, q2), out)
    assert lhs <= holder_constant(out) * rhs * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_quasi_triangle(box, seed):
    rng = np.random.default_rng(1000 + seed)
    idx = LorentzIndex(rng.uniform(1.5, 6.0), rng.choice([0.5, 1.0, 2.0, math.inf]))
    f = _interior_random(box, rng)
    g = _interior_random(box, rng, -1.5, -0.5)
    lhs = quasinorm(f + g, idx, check_divergence=False)
    rhs = quasinorm(f, idx) + quasinorm(g, idx)
    assert lhs <= quasi_triangle_constant(idx) * rhs * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_inclusion_monotone_in_q(box, seed):
    rng = np.random.default_rng(2000 + seed)
    p = rng.uniform(1.5, 5.0)
    f = _interior_random(box, rng)
    for q1, q2 in [(1.0, 2.0), (1.0, math.inf), (2.0, 4.0)]:
        small = quasinorm(f, LorentzIndex(p, q1))
        large = quasinorm(f, LorentzIndex(p, q2))
        assert large <= inclusion_constant(p, q1, q2) * small * (1 + 1e-12)


def test_holder_exponent_mismatch(box, rng):
    f = _interior_random(box, rng)
    with pytest.raises(ExponentMismatch):
        holder_product_bound(f, f, LorentzIndex(2, 2), LorentzIndex(2, 2), LorentzIndex(2, 1))
    with pytest.raises(ExponentMismatch):
        holder_product_bound(f, f, LorentzIndex(2, 2), LorentzIndex(2, 2), LorentzIndex(1, 2))


# -----------------------
# Interpolation
# -----------------------
def test_interpolation_between_weak_endpoints(fine_grid):
    r = fine_grid.nodes
    f = SampledFunction.radial(fine_grid, np.where(r < 1.0, 1.0 / r, 1.0 / r ** 2))
    value = interpolation_membership(f, 2.0, 3.0, 2.25, 1.0)
    assert math.isfinite(value) and value > 0


def test_interpolation_needs_both_endpoints(fine_grid):
    f = SampledFunction.radial(fine_grid, 1.0 / fine_grid.nodes)
    with pytest.raises(DivergentNorm):
        interpolation_membership(f, 2.0, 3.0, 2.25, 1.0)
    with pytest.raises(InvalidRange):
        interpolation_membership(f, 3.0, 2.0, 2.25, 1.0)
