# src/zerostate/solver.py
"""
Zero-energy states from the compact reduction.

With V = W + K and Gw the Green function of -Delta + W, a zero state solves

    psi = -Gw K psi,

which only involves psi on supp K. `assemble` builds A = Gw[S, S] diag(K_S),
`solve` looks for a null vector of I + A (smallest singular value under
`tol`), and `extend` spreads the state to any target set through the same
representation formula.

Radial potentials are solved per angular channel (psi = u(r) Theta_ell);
general potentials use a point-cloud evaluator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.discretization.grid import (
    PointSet,
    RadialGrid,
    SampledFunction,
    TensorGrid,
    harmonic_dimension,
    same_grid,
    zonal_profile,
)
from src.errors import ContractionViolated, GridMismatch, InvalidRange, NumericOverflow
from src.greens.neumann import DEFAULT_TOL, GreensEvaluator, build_evaluator
from src.potentials.decomposition import Decomposition

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
TOL_FACTOR = 10.0           # default tol = TOL_FACTOR * resolution^2
REPORTED_SINGULAR_VALUES = 4


def default_tol(dec: Decomposition) -> float:
    return TOL_FACTOR * dec.V.grid.resolution ** 2


@dataclass(frozen=True, eq=False)
class CompactOperator:
    matrix: np.ndarray           # A = Gw[S,S] diag(K_S)
    support: np.ndarray          # layer node indices of supp K
    K_values: np.ndarray         # K on the support nodes
    columns: np.ndarray          # Gw[:, S] on every layer node
    dec: Decomposition
    ev: GreensEvaluator

    @property
    def size(self) -> int:
        return int(self.support.size)

    @property
    def channel(self) -> Optional[int]:
        return self.ev.layer.channel if self.ev.kind == "channel" else None


@dataclass(frozen=True, eq=False)
class ZeroState:
    psi: SampledFunction             # on the layer: radial grid (channel) or V's grid / point set (cloud)
    support_values: np.ndarray       # psi on supp K, max |.| = 1
    sigma_min: float
    singular_values: np.ndarray      # smallest few, ascending
    multiplicity: int
    operator: CompactOperator

    @property
    def channel(self) -> Optional[int]:
        return self.operator.channel

    @property
    def density(self) -> np.ndarray:
        """K psi on the support nodes."""
        return self.operator.K_values * self.support_values


def _check_pair(dec: Decomposition, ev: GreensEvaluator) -> None:
    if not same_grid(dec.W.grid, ev.W.grid) or not np.array_equal(dec.W.values, ev.W.values):
        raise GridMismatch("the evaluator was built for a different W")
    if ev.C_measured >= 1.0:
        raise ContractionViolated(f"evaluator contraction {ev.C_measured:.4f} >= 1")


def evaluator_for(dec: Decomposition, channel: Optional[int] = None, series_tol: float = DEFAULT_TOL,
                  **evaluator_options) -> GreensEvaluator:
    """
    Evaluator for W whose layer also covers supp K. `series_tol` bounds the
    Neumann-series tail; the null-space `tol` of `solve` is a separate knob.
    """
    if channel is not None:
        return build_evaluator(dec.W, series_tol, channel=channel, **evaluator_options)
    return build_evaluator(dec.W, series_tol, include=dec.K.values != 0, **evaluator_options)


def assemble(dec: Decomposition, ev: GreensEvaluator) -> CompactOperator:
    _check_pair(dec, ev)
    missing = np.setdiff1d(np.flatnonzero(dec.K.values), ev.layer.source)
    if missing.size:
        raise GridMismatch(f"{missing.size} nodes of supp K are not on the evaluator's layer")
    K_layer = dec.K.values[ev.layer.source]
    support = np.flatnonzero(K_layer)
    if support.size == 0:
        empty = np.zeros((0, 0))
        return CompactOperator(empty, support, np.zeros(0), np.zeros((ev.layer.size, 0)), dec, ev)
    columns = ev.resolvent_columns(support)
    K_S = K_layer[support]
    A = columns[support] * K_S[None, :]
    logger.info("assemble: %d support nodes on a %s layer", support.size, ev.kind)
    return CompactOperator(A, support, K_S, columns, dec, ev)


def _layer_function(op: CompactOperator, values: np.ndarray, density: np.ndarray) -> SampledFunction:
    """Channel states live on the radial grid, tensor clouds are filled out to the whole lattice."""
    ev = op.ev
    if ev.kind == "channel":
        return SampledFunction.zonal(ev.layer.grid, values, ev.layer.channel)
    grid = op.dec.V.grid
    if not isinstance(grid, TensorGrid):
        return SampledFunction(PointSet(ev.layer.points, ev.dim), values)
    full = np.zeros(grid.size)
    full[ev.layer.source] = values
    rest = np.setdiff1d(np.arange(grid.size), ev.layer.source)
    if rest.size:
        full[rest] = -ev.target_rows(grid.points[rest], op.support) @ density
    return SampledFunction(grid, full)


def solve(A: CompactOperator, tol: Optional[float] = None) -> Optional[ZeroState]:
    """
    Null vector of I + A, or None when the smallest singular value exceeds
    `tol`. The returned state is normalized so that its largest entry on
    supp K is exactly +1.
    """
    if tol is None:
        tol = default_tol(A.dec)
    if not tol > 0:
        raise InvalidRange(f"solver tolerance must be positive, got {tol}")
    if A.size == 0:
        logger.info("solve: K vanishes, no compact part to invert")
        return None
    M = np.eye(A.size) + A.matrix
    try:
        _, s, Vh = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise NumericOverflow(f"SVD of I + A failed: {exc}") from exc
    sigma = s[::-1]
    sigma_min = float(sigma[0])
    logger.info("solve: sigma_min(I + A) = %.3e (tol %.3e)", sigma_min, tol)
    if sigma_min > tol:
        return None

    v = Vh[-1]
    v = v / v[int(np.argmax(np.abs(v)))]
    count = int(np.sum(s <= tol))
    channel = A.channel
    multiplicity = count * (harmonic_dimension(A.dec.dim, channel) if channel is not None else 1)

    density = A.K_values * v
    values = -A.columns @ density
    values[A.support] = v
    psi = _layer_function(A, values, density)
    return ZeroState(psi, v, sigma_min, sigma[:REPORTED_SINGULAR_VALUES].copy(), multiplicity, A)


def extend(z: ZeroState, dec: Decomposition, ev: GreensEvaluator,
           targets: Union[np.ndarray, TensorGrid, RadialGrid]) -> SampledFunction:
    """psi(x) = -sum_S Gw(x, z_k) K_k psi_k at every target."""
    _check_pair(dec, ev)
    if z.operator.ev is not ev:
        raise GridMismatch("the state was solved with a different evaluator")
    op = z.operator
    if isinstance(targets, RadialGrid):
        if ev.kind != "channel":
            raise GridMismatch("radial targets need a channel evaluator")
        u = _channel_profile(z, targets.nodes)
        return SampledFunction.zonal(targets, u, ev.layer.channel)

    if isinstance(targets, TensorGrid):
        points = targets.points
    else:
        points = np.atleast_2d(np.asarray(targets, dtype=float))
    if points.shape[1] != ev.dim:
        raise GridMismatch(f"targets of dimension {points.shape[1]} for a {ev.dim}-D state")

    if ev.kind == "channel":
        r = np.sqrt(np.sum(points ** 2, axis=1))
        radii, inverse = np.unique(r, return_inverse=True)
        u = _channel_profile(z, radii)[inverse]
        t = points[:, 0] / np.where(r > 0, r, 1.0)
        values = u * zonal_profile(ev.layer.channel, ev.dim, t)
    elif op.size == 0:
        values = np.zeros(points.shape[0])
    else:
        values = -ev.target_rows(points, op.support) @ z.density

    if isinstance(targets, TensorGrid):
        return SampledFunction(targets, values)
    return SampledFunction(PointSet(points, ev.dim), values)


def _channel_profile(z: ZeroState, radii: np.ndarray) -> np.ndarray:
    op = z.operator
    if op.size == 0:
        return np.zeros(np.asarray(radii).size)
    return -op.ev.target_rows(radii, op.support) @ z.density


# -----------------------
# Channel scan
# -----------------------
@dataclass(frozen=True)
class ChannelScan:
    channel: int
    sigma_min: float
    multiplicity: int


def solve_channel(dec: Decomposition, channel: int, tol: Optional[float] = None,
                  **evaluator_options) -> tuple:
    """(evaluator, operator, state or None) for one angular channel."""
    ev = evaluator_for(dec, channel=channel, **evaluator_options)
    op = assemble(dec, ev)
    return ev, op, solve(op, tol)


def scan_channels(dec: Decomposition, channels: Sequence[int], tol: Optional[float] = None,
                  **evaluator_options) -> List[ChannelScan]:
    """sigma_min of I + A per channel; multiplicity 0 where no state is found."""
    if not isinstance(dec.V.grid, RadialGrid):
        raise GridMismatch("channel scans need a radial grid")
    out: List[ChannelScan] = []
    for ell in channels:
        ev, op, state = solve_channel(dec, ell, tol, **evaluator_options)
        if op.size == 0:
            sigma = 1.0
        else:
            sigma = float(np.linalg.svd(np.eye(op.size) + op.matrix, compute_uv=False)[-1])
        out.append(ChannelScan(ell, sigma, state.multiplicity if state else 0))
        logger.info("channel %d: sigma_min = %.3e%s", ell, sigma, " (zero state)" if state else "")
    return out


def scan_table(scans: Sequence[ChannelScan]) -> List[Dict[str, float]]:
    return [{"channel": s.channel, "sigma_min": s.sigma_min, "multiplicity": s.multiplicity}
            for s in scans]


def aligned_error(values: np.ndarray, reference: np.ndarray) -> float:
    """max|v - c ref| / max|c ref| with c the least-squares scale (sign included)."""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    denom = float(reference @ reference)
    if denom == 0.0:
        raise InvalidRange("reference state vanishes on the comparison nodes")
    c = float(values @ reference) / denom
    scale = float(np.max(np.abs(c * reference)))
    return float(np.max(np.abs(values - c * reference))) / scale
