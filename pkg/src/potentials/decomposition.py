# src/potentials/decomposition.py
"""
Splits V = W + K with K simple and compactly supported and W small in L^{n/2,1}.

Reads:
  - a sampled potential V (radial or tensor grid)

Behavior:
  - K = q_s * round(clamp(V, -M, M) / q_s) on |x| <= R, zero elsewhere
  - each round re-measures ||V - K||_{n/2,1}; if it is still above delta, the
    part of V - K responsible for the excess is escalated (R doubles for the
    tail, M doubles for the clamp, q_s halves for the quantization)
  - a returned Decomposition always carries its re-measured norm and the
    contraction constant 2^{n-1} kappa_n ||a||_{n/(n-2),inf} ||W||_{n/2,1}
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config import DEFAULT_CONTRACTION_TARGET, MAX_CONTRACTION
from src.discretization.grid import (
    RadialGrid,
    SampledFunction,
    Symmetry,
    TensorGrid,
    integrate,
    same_grid,
    sphere_monomial_integral,
    zonal_coefficients,
)
from src.errors import BudgetExhausted, ContractionViolated, GridMismatch, InvalidRange
from src.greens.kernels import fundamental_constant
from src.lorentz.quasinorm import LorentzIndex, kernel_weak_norm, lp_norm, quasinorm

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
DEFAULT_BUDGET = 24
DEFAULT_RADIUS = 1.0
INITIAL_LEVELS = 8          # q_s = M / INITIAL_LEVELS in the first round
DEFAULT_RELATIVE_DELTA = 0.1


def contraction_constant(n: int, W_norm: float) -> float:
    """C = 2^{n-1} kappa_n ||a||_{n/(n-2),inf} ||W||_{n/2,1}."""
    return 2.0 ** (n - 1) * fundamental_constant(n) * kernel_weak_norm(n) * W_norm


def default_delta(norm_V: float, n: int, target: float = DEFAULT_CONTRACTION_TARGET) -> float:
    """min(0.1 ||V||, the ||W|| that makes the contraction constant equal `target`)."""
    cap = target / contraction_constant(n, 1.0)
    if norm_V <= 0:
        return cap
    return min(DEFAULT_RELATIVE_DELTA * norm_V, cap)


@dataclass(frozen=True, eq=False)
class Decomposition:
    V: SampledFunction
    W: SampledFunction
    K: SampledFunction
    delta: float
    measured_W_norm: float
    contraction_C: float
    support_radius: float       # R: K vanishes for |x| > R
    clamp: float                # M
    step: float                 # q_s
    rounds: int

    @property
    def dim(self) -> int:
        return self.V.dim

    @property
    def levels(self) -> np.ndarray:
        """Distinct values taken by K (0 included when K vanishes somewhere)."""
        return np.unique(self.K.values)

    def summary(self) -> Dict[str, float]:
        return {
            "delta": self.delta,
            "measured_W_norm": self.measured_W_norm,
            "contraction_C": self.contraction_C,
            "support_radius": self.support_radius,
            "clamp": self.clamp,
            "step": self.step,
            "rounds": self.rounds,
            "levels": int(self.levels.size),
        }


def node_radii(f: SampledFunction) -> np.ndarray:
    grid = f.grid
    if isinstance(grid, RadialGrid):
        return grid.nodes
    if isinstance(grid, TensorGrid):
        return grid.radii
    raise GridMismatch("decomposition needs a radial or tensor grid")


def quantize(V: SampledFunction, radius: float, clamp: float, step: float) -> SampledFunction:
    """Simple part: clamped, rounded to the q_s lattice (0 stays 0), cut at |x| <= radius."""
    r = node_radii(V)
    clipped = np.clip(V.values, -clamp, clamp)
    levels = step * np.rint(clipped / step)
    return V.with_values(np.where(r <= radius, levels, 0.0))


def _excess_parts(V: SampledFunction, radius: float, clamp: float, step: float,
                  idx: LorentzIndex) -> Dict[str, float]:
    r = node_radii(V)
    inside = r <= radius
    clipped = np.clip(V.values, -clamp, clamp)
    tail = V.with_values(np.where(inside, 0.0, V.values))
    over = V.with_values(np.where(inside, V.values - clipped, 0.0))
    rounding = V.with_values(np.where(inside, clipped - step * np.rint(clipped / step), 0.0))
    return {
        "tail": quasinorm(tail, idx, check_divergence=False),
        "clamp": quasinorm(over, idx, check_divergence=False),
        "quantization": quasinorm(rounding, idx, check_divergence=False),
    }


def decompose(V: SampledFunction, delta: Optional[float] = None, budget: int = DEFAULT_BUDGET,
              radius0: float = DEFAULT_RADIUS,
              max_contraction: float = MAX_CONTRACTION) -> Decomposition:
    """
    Certified V = W + K. Raises BudgetExhausted when delta is not reached in
    `budget` rounds and ContractionViolated when the reached W still gives a
    contraction constant >= max_contraction.
    """
    n = V.dim
    idx = LorentzIndex.potential_class(n)
    if budget < 1:
        raise InvalidRange(f"budget must be >= 1, got {budget}")
    if radius0 <= 0:
        raise InvalidRange(f"initial radius must be positive, got {radius0}")
    norm_V = quasinorm(V, idx)   # DivergentNorm: V is not in the potential class
    if delta is None:
        delta = default_delta(norm_V, n)
    if not delta > 0:
        raise InvalidRange(f"delta must be positive, got {delta}")

    if V.is_zero():
        zero = SampledFunction.zeros_like(V)
        logger.info("decompose: V vanishes, W = K = 0")
        return Decomposition(V, zero, zero, delta, 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    radius = radius0
    clamp = float(np.max(np.abs(V.values)))
    step = clamp / INITIAL_LEVELS
    for rounds in range(1, budget + 1):
        K = quantize(V, radius, clamp, step)
        W = V - K
        W_norm = quasinorm(W, idx, check_divergence=False)
        logger.debug("decompose round %d: R=%g M=%g q=%g ||W||=%.6g", rounds, radius, clamp, step, W_norm)
        if W_norm <= delta:
            C = contraction_constant(n, W_norm)
            logger.info("decompose: ||W||_%s = %.6g <= %.6g after %d round(s), C = %.4f",
                        idx, W_norm, delta, rounds, C)
            if C >= max_contraction:
                raise ContractionViolated(
                    f"contraction constant {C:.4f} >= {max_contraction} for ||W|| = {W_norm:.6g}; "
                    f"lower delta"
                )
            return Decomposition(V, W, K, delta, W_norm, C, radius, clamp, step, rounds)

        parts = _excess_parts(V, radius, clamp, step, idx)
        grow = [name for name, value in parts.items() if value > delta / 3.0]
        if not grow:
            grow = [max(parts, key=parts.get)]
        if "tail" in grow:
            radius *= 2.0
        if "clamp" in grow:
            clamp *= 2.0
        if "quantization" in grow:
            step /= 2.0

    raise BudgetExhausted(
        f"||V - K||_{idx} stayed above delta={delta:.6g} after {budget} rounds "
        f"(R={radius:g}, M={clamp:g}, q={step:g}); refine the grid or raise delta"
    )


# -----------------------
# Moments
# -----------------------
def multi_indices(n: int, order: int) -> List[Tuple[int, ...]]:
    """All alpha with |alpha| == order, lexicographically descending ((1,0,0) first)."""
    out = [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order]
    return sorted(out, reverse=True)


def _radial_moment(P: SampledFunction, alpha: Tuple[int, ...]) -> float:
    grid = P.grid
    n = grid.dim
    k = sum(alpha)
    radial_part = float(np.sum(grid.nodes ** k * P.values * grid.weights))
    if P.symmetry == Symmetry.RADIAL:
        angular = sphere_monomial_integral(alpha)
    else:
        angular = 0.0
        for j, c in enumerate(zonal_coefficients(P.channel, n)):
            if c == 0.0:
                continue
            beta = list(alpha)
            beta[0] += j
            angular += c * sphere_monomial_integral(beta)
    return radial_part * angular


def moments(V: SampledFunction, psi: SampledFunction, max_order: int = 2) -> Dict[Tuple[int, ...], float]:
    """M_alpha = int y^alpha V psi dy for every |alpha| <= max_order."""
    if max_order not in (0, 1, 2):
        raise InvalidRange(f"max_order must be 0, 1 or 2, got {max_order}")
    if not same_grid(V.grid, psi.grid):
        raise GridMismatch("moments need V and psi on one grid")
    P = V * psi
    n = V.dim
    out: Dict[Tuple[int, ...], float] = {}
    for order in range(max_order + 1):
        for alpha in multi_indices(n, order):
            if isinstance(P.grid, RadialGrid):
                out[alpha] = _radial_moment(P, alpha)
            else:
                monomial = np.prod(P.grid.points ** np.asarray(alpha, dtype=float), axis=1)
                out[alpha] = integrate(P.with_values(P.values * monomial))
    return out


def moment_scale(V: SampledFunction, psi: SampledFunction, order: int) -> float:
    """int |y|^order |V psi| dy, the natural size of the order-`order` moments."""
    P = (V * psi).abs()
    r = node_radii(P)
    values = P.values * r ** order
    if isinstance(P.grid, RadialGrid):
        return lp_norm(P.with_values(values), 1.0)
    return float(np.sum(values) * P.grid.cell_volume)


def max_abs_moment(m: Dict[Tuple[int, ...], float], order: int) -> float:
    vals = [abs(v) for a, v in m.items() if sum(a) == order]
    return max(vals) if vals else 0.0
