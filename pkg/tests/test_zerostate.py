# tests/test_zerostate.py
import math

import numpy as np
import pytest

from conftest import solved
from src.discretization.grid import SampledFunction, make_log_radial_grid, make_tensor_grid
from src.errors import GridMismatch, InvalidRange
from src.potentials.catalogue import PotentialSpec, breathing_state, oracle_state, sample
from src.potentials.decomposition import decompose
from src.zerostate.solver import (
    aligned_error,
    assemble,
    default_tol,
    evaluator_for,
    extend,
    scan_channels,
    scan_table,
    solve,
    solve_channel,
)


def _oracle_error(s, oracle) -> float:
    nodes = s.ev.layer.points[s.op.support]
    return aligned_error(s.state.support_values, oracle.profile(nodes))


# -----------------------
# Closed-form states
# -----------------------
def test_radial_state(radial3):
    state = radial3.state
    assert state is not None
    assert state.multiplicity == 1
    assert state.sigma_min <= default_tol(radial3.dec)
    assert np.max(state.support_values) == 1.0
    assert np.all(np.diff(state.singular_values) >= 0)
    assert _oracle_error(radial3, oracle_state(radial3.spec)) <= 0.05


def test_dipole_state_has_three_partners(dipole3):
    state = dipole3.state
    assert state is not None
    assert state.channel == 1
    assert state.multiplicity == 3
    assert _oracle_error(dipole3, oracle_state(dipole3.spec)) <= 0.05


def test_breathing_state(breathing3):
    assert breathing3.state is not None
    assert breathing3.state.multiplicity == 1
    assert _oracle_error(breathing3, breathing_state(3)) <= 0.05


def test_oracle_error_refines():
    spec = PotentialSpec("inverse_design_radial", 3)
    coarse = _oracle_error(solved(spec.kind.value, 3, 0, count=300), oracle_state(spec))
    fine = _oracle_error(solved(spec.kind.value, 3, 0, count=599), oracle_state(spec))
    assert fine <= 0.4 * coarse


# -----------------------
# No state
# -----------------------
def test_detuned_potential_has_no_state():
    s = solved("inverse_design_radial", 3, 0, amplitude=0.5)
    assert s.state is None


def test_zero_potential_has_no_state(radial_grid3):
    V = SampledFunction.radial(radial_grid3, np.zeros(radial_grid3.size))
    dec = decompose(V)
    ev, op, state = solve_channel(dec, 0)
    assert op.size == 0
    assert state is None


def test_solver_tolerance_must_be_positive(radial3):
    for tol in (0.0, -1.0):
        with pytest.raises(InvalidRange):
            solve(radial3.op, tol)


def test_channel_scan(radial3):
    scans = scan_channels(radial3.dec, [0, 1, 2])
    assert [s.multiplicity for s in scans] == [1, 0, 0]
    assert scans[0].sigma_min == pytest.approx(radial3.state.sigma_min)
    assert all(s.sigma_min > default_tol(radial3.dec) for s in scans[1:])
    assert scan_table(scans)[1] == {"channel": 1, "sigma_min": scans[1].sigma_min, "multiplicity": 0}


def test_channel_scan_keeps_series_and_solver_tolerances_apart(radial3):
    dec = radial3.dec
    scans = scan_channels(dec, [0, 1], default_tol(dec), series_tol=1e-8, max_order=200)
    assert [s.multiplicity for s in scans] == [1, 0]
    ev, _, state = solve_channel(dec, 0, default_tol(dec), series_tol=1e-8)
    assert ev.tol == 1e-8
    assert state is not None and state.multiplicity == 1


@pytest.mark.parametrize("amplitude", [0.9, 1.1])
def test_detuning_raises_sigma_min(radial3, amplitude):
    detuned = solved("inverse_design_radial", 3, 0, amplitude=amplitude)
    sigma = scan_channels(detuned.dec, [0])[0].sigma_min
    assert sigma > radial3.state.sigma_min
    assert sigma > default_tol(detuned.dec)


# -----------------------
# Extension
# -----------------------
def test_extension_reproduces_layer_values(radial3):
    state, dec, ev = radial3.state, radial3.dec, radial3.ev
    on_grid = extend(state, dec, ev, dec.V.grid)
    off = np.setdiff1d(np.arange(dec.V.grid.size), radial3.op.support)
    assert np.allclose(on_grid.values[off], state.psi.values[off], rtol=1e-4, atol=1e-6)


def test_extension_to_points_is_radial(radial3):
    pts = np.array([[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, -3.0]])
    values = extend(radial3.state, radial3.dec, radial3.ev, pts).values
    assert values == pytest.approx(np.full(3, values[0]), rel=1e-12)
    with pytest.raises(GridMismatch):
        extend(radial3.state, radial3.dec, radial3.ev, np.ones((2, 4)))


def test_extension_needs_the_solving_evaluator(radial3):
    other = evaluator_for(radial3.dec, channel=0)
    with pytest.raises(GridMismatch):
        extend(radial3.state, radial3.dec, other, np.array([[2.0, 0.0, 0.0]]))


def test_assemble_rejects_foreign_evaluator(radial3, dipole3):
    with pytest.raises(GridMismatch):
        assemble(dipole3.dec, radial3.ev)


def test_aligned_error():
    ref = np.array([1.0, 0.5, -0.25])
    assert aligned_error(-3.0 * ref, ref) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidRange):
        aligned_error(ref, np.zeros(3))


# -----------------------
# Point-cloud path
# -----------------------
def test_square_well_threshold_resonance():
    """Depth pi^2/4 on the unit ball sits exactly at the zero-energy threshold."""
    grid = make_tensor_grid(0.2, 1.2, 3)
    spec = PotentialSpec("square_well", 3, (-math.pi ** 2 / 4, 1.0))
    dec = decompose(sample(spec, grid))
    assert dec.W.is_zero()
    ev = evaluator_for(dec)
    assert ev.kind == "cloud" and ev.J == 0
    state = solve(assemble(dec, ev))
    assert state is not None
    assert state.psi.grid is grid

    r = grid.radii[ev.layer.source[state.operator.support]]
    closed_form = np.sin(math.pi * r / 2) / np.where(r > 0, r, 1.0)
    closed_form[r == 0] = math.pi / 2
    assert aligned_error(state.support_values, closed_form) <= 0.2

    far = extend(state, dec, ev, np.array([[6.0, 0.0, 0.0], [12.0, 0.0, 0.0]])).values
    assert far[0] / far[1] == pytest.approx(2.0, rel=0.02)


def test_channel_scan_needs_radial_grid():
    grid = make_tensor_grid(0.25, 1.0, 3)
    dec = decompose(sample(PotentialSpec("square_well", 3, (-1.0, 0.5)), grid))
    with pytest.raises(GridMismatch):
        scan_channels(dec, [0])


def test_extension_to_radial_targets_needs_channel():
    grid = make_tensor_grid(0.2, 1.2, 3)
    dec = decompose(sample(PotentialSpec("square_well", 3, (-math.pi ** 2 / 4, 1.0)), grid))
    ev = evaluator_for(dec)
    state = solve(assemble(dec, ev))
    with pytest.raises(GridMismatch):
        extend(state, dec, ev, make_log_radial_grid(1e-2, 10.0, 50, 3))
