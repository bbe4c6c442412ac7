# tests/test_potentials.py
import math

import numpy as np
import pytest

from src.discretization.grid import SampledFunction, make_log_radial_grid, make_tensor_grid
from src.errors import BudgetExhausted, DivergentNorm, UnknownPotentialKind
from src.lorentz.quasinorm import LorentzIndex, quasinorm
from src.potentials.catalogue import (
    PotentialKind,
    PotentialSpec,
    breathing_state,
    evaluate,
    oracle_state,
    parse_kind,
    radial_profile,
    sample,
)
from src.potentials.decomposition import (
    contraction_constant,
    decompose,
    default_delta,
    max_abs_moment,
    moments,
    multi_indices,
    node_radii,
)


def test_parse_kind():
    assert parse_kind("inverse_design_radial") == PotentialKind.INVERSE_DESIGN_RADIAL
    with pytest.raises(UnknownPotentialKind):
        parse_kind("harmonic_oscillator")
    with pytest.raises(ValueError):
        parse_kind("")


def test_radial_profile_values():
    spec = PotentialSpec("inverse_design_radial", 3, (1.0, 1.0))
    assert radial_profile(spec, np.array([0.0, 1.0])) == pytest.approx([-3.0, -0.75])
    dip = PotentialSpec("inverse_design_dipole", 4, (1.0, 1.0))
    assert evaluate(dip, np.zeros(4)) == pytest.approx(-24.0)
    well = PotentialSpec("square_well", 3, (-2.0, 0.5))
    assert list(radial_profile(well, np.array([0.25, 0.75]))) == [-2.0, 0.0]


def _laplacian_channel(u, r, n, ell, step=1e-4):
    d1 = (u(r + step) - u(r - step)) / (2 * step)
    d2 = (u(r + step) - 2 * u(r) + u(r - step)) / step ** 2
    return d2 + (n - 1) / r * d1 - ell * (ell + n - 2) / r ** 2 * u(r)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("kind", ["inverse_design_radial", "inverse_design_dipole"])
def test_closed_form_states_solve_the_equation(kind, n):
    spec = PotentialSpec(kind, n, (1.0, 1.0))
    r = np.array([0.3, 0.7, 1.0, 2.5, 6.0])
    states = [oracle_state(spec)]
    if kind == "inverse_design_dipole":
        states.append(breathing_state(n))
    for state in states:
        lap = _laplacian_channel(state.profile, r, n, state.channel)
        assert lap == pytest.approx(radial_profile(spec, r) * state.profile(r), rel=1e-4, abs=1e-6)


def test_detuned_potential_has_no_oracle():
    assert oracle_state(PotentialSpec("inverse_design_radial", 3, (0.5, 1.0))) is None
    assert oracle_state(PotentialSpec("compact_bump", 3, (1.0, 1.0))) is None


def test_potential_class_norm_radial3():
    grid = make_log_radial_grid(1e-3, 1e3, 1400, 3)
    V = sample(PotentialSpec("inverse_design_radial", 3), grid)
    expected = 4.5 * (4 * math.pi / 3) ** (2.0 / 3.0)
    assert quasinorm(V, LorentzIndex.potential_class(3)) == pytest.approx(expected, rel=0.01)


def test_inverse_square_tail_is_not_admissible(radial_grid3):
    V = sample(PotentialSpec("inverse_square_tail", 3, (-1.0, 1.0)), radial_grid3)
    with pytest.raises(DivergentNorm):
        quasinorm(V, LorentzIndex.potential_class(3))
    with pytest.raises(DivergentNorm):
        decompose(V)


def test_clipped_potential_stays_admissible(radial_grid3):
    r = radial_grid3.nodes
    V = SampledFunction.radial(radial_grid3, np.maximum(-3.0 / (1.0 + r ** 2) ** 2, -1.0))
    norm = quasinorm(V, LorentzIndex.potential_class(3))
    assert 0 < norm < quasinorm(sample(PotentialSpec("inverse_design_radial", 3), radial_grid3),
                                LorentzIndex.potential_class(3))
    dec = decompose(V)
    assert dec.contraction_C <= 0.4
    assert np.allclose(dec.W.values + dec.K.values, V.values, rtol=0, atol=1e-12)


# -----------------------
# Decomposition
# -----------------------
@pytest.mark.parametrize("kind", ["inverse_design_radial", "inverse_design_dipole"])
def test_decomposition_certificate(radial_grid3, kind):
    V = sample(PotentialSpec(kind, 3), radial_grid3)
    dec = decompose(V)
    assert dec.contraction_C <= 0.4
    assert dec.measured_W_norm <= dec.delta
    assert np.allclose(dec.W.values + dec.K.values, V.values, rtol=0, atol=1e-12)
    assert np.all(dec.K.values[node_radii(dec.K) > dec.support_radius] == 0)
    assert dec.levels.size <= 2 * dec.clamp / dec.step + 2
    assert contraction_constant(3, dec.measured_W_norm) == pytest.approx(dec.contraction_C)


def test_simple_input_keeps_w_zero():
    grid = make_tensor_grid(0.1, 1.0, 3)
    V = sample(PotentialSpec("square_well", 3, (-2.0, 0.5)), grid)
    dec = decompose(V)
    assert dec.W.is_zero()
    assert np.array_equal(dec.K.values, V.values)


def test_zero_potential():
    grid = make_tensor_grid(0.2, 1.0, 3)
    V = SampledFunction(grid, np.zeros(grid.size))
    dec = decompose(V)
    assert dec.W.is_zero() and dec.K.is_zero()
    assert dec.contraction_C == 0.0


def test_budget_exhausted(radial_grid3):
    V = sample(PotentialSpec("inverse_design_radial", 3), radial_grid3)
    with pytest.raises(BudgetExhausted):
        decompose(V, budget=1)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_default_delta_meets_target(n):
    for norm in (0.5, 10.0, 1e3):
        assert contraction_constant(n, default_delta(norm, n, 0.4)) <= 0.4 * (1 + 1e-12)


# -----------------------
# Moments
# -----------------------
def test_multi_indices():
    assert multi_indices(3, 1) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert len(multi_indices(3, 2)) == 6


def test_monopole_moment_of_radial_state(radial_grid3):
    spec = PotentialSpec("inverse_design_radial", 3)
    V = sample(spec, radial_grid3)
    psi = oracle_state(spec).on_radial(radial_grid3)
    m = moments(V, psi, 2)
    assert m[(0, 0, 0)] == pytest.approx(-4 * math.pi, rel=2e-3)
    assert max_abs_moment(m, 1) == 0.0


def test_dipole_moments(radial_grid3):
    spec = PotentialSpec("inverse_design_dipole", 3)
    V = sample(spec, radial_grid3)
    psi = oracle_state(spec).on_radial(radial_grid3)
    m = moments(V, psi, 2)
    assert m[(0, 0, 0)] == 0.0
    assert m[(1, 0, 0)] == pytest.approx(-4 * math.pi, rel=2e-3)
    assert m[(0, 1, 0)] == 0.0 and m[(0, 0, 1)] == 0.0
    assert max_abs_moment(m, 2) == 0.0
