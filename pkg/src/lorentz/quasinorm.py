# src/lorentz/quasinorm.py
"""
Lorentz-space toolkit on sampled functions.

A sampled function is a point-mass measure (values, masses), so |f| is a
step function in the measure variable: distinct levels v_1 > v_2 > ... with
cumulative masses D_1 < D_2 < .... Distribution function, decreasing
rearrangement and quasinorms are evaluated exactly on that staircase; no
t-mesh is involved.

    f*(s)        = v_{m+1},  m = #{k : D_k <= s}
    ||f||_{p,q}  = ( sum_k v_k^q (p/q) (D_k^{q/p} - D_{k-1}^{q/p}) )^{1/q}
    ||f||_{p,inf} = max_k v_k D_k^{1/p}

Divergence is judged from dyadic blocks in s at both ends of the staircase
(small s: singularity, large s: tail). The tail end is only judged when f is
still nonzero on the outer edge of its grid. The singular end is skipped when the
largest value is a flat top held on several nodes: such an f is bounded.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.discretization.grid import (
    RadialGrid,
    SampledFunction,
    TensorGrid,
    same_grid,
    unit_ball_volume,
)
from src.errors import (
    DivergentNorm,
    ExponentMismatch,
    GridMismatch,
    InvalidRange,
    NumericOverflow,
)

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
END_BLOCKS = 4              # dyadic blocks inspected at each end
FINITE_RATIO_MAX = 0.97     # q < inf: every end/next block ratio above this -> divergent
WEAK_GROWTH_MIN = 1.03      # q = inf: every end/next supremum ratio above this -> divergent
FLAT_TOP_NODES = 3          # a maximum held on this many nodes is a plateau, not a peak
EXPONENT_TOL = 1e-12


# -----------------------
# Index
# -----------------------
@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: float

    def __post_init__(self):
        if not (0 < self.p < math.inf):
            raise InvalidRange(f"Lorentz exponent p must be finite and positive, got {self.p}")
        if not self.q > 0:
            raise InvalidRange(f"Lorentz exponent q must be positive or inf, got {self.q}")

    @property
    def weak(self) -> bool:
        return math.isinf(self.q)

    @property
    def inverse_q(self) -> float:
        return 0.0 if self.weak else 1.0 / self.q

    def __str__(self):
        q = "inf" if self.weak else f"{self.q:g}"
        return f"({self.p:g},{q})"

    @classmethod
    def of(cls, p, q) -> "LorentzIndex":
        return cls(float(_parse_exponent(p)), float(_parse_exponent(q)))

    @classmethod
    def potential_class(cls, n: int) -> "LorentzIndex":
        return cls(n / 2.0, 1.0)

    @classmethod
    def kernel_class(cls, n: int) -> "LorentzIndex":
        return cls(n / (n - 2.0), math.inf)


def _parse_exponent(value) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo"):
            return math.inf
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    return float(value)


# -----------------------
# Staircase of |f|
# -----------------------
@dataclass(frozen=True, eq=False)
class Staircase:
    levels: np.ndarray   # distinct positive values of |f|, decreasing
    mass: np.ndarray     # D_k = measure of {|f| >= levels[k]}
    top_nodes: int = 1   # nodes holding the largest value

    @property
    def empty(self) -> bool:
        return self.levels.size == 0

    @property
    def previous_mass(self) -> np.ndarray:
        return np.concatenate([[0.0], self.mass[:-1]])


def staircase(f: SampledFunction) -> Staircase:
    values, masses = f.as_measure()
    if not np.all(np.isfinite(values)):
        raise NumericOverflow("non-finite samples in a Lorentz computation")
    a = np.abs(values)
    keep = (a > 0) & (masses > 0)
    uniq, inverse, counts = np.unique(a[keep], return_inverse=True, return_counts=True)
    grouped = np.bincount(inverse, weights=masses[keep], minlength=uniq.size)
    top = int(counts[-1]) if counts.size else 0
    return Staircase(levels=uniq[::-1].copy(), mass=np.cumsum(grouped[::-1]), top_nodes=top)


def reaches_edge(f: SampledFunction) -> bool:
    """True when f is nonzero on the outer boundary of its grid."""
    grid = f.grid
    if isinstance(grid, RadialGrid):
        return bool(f.values[-1] != 0)
    if isinstance(grid, TensorGrid):
        F = f.values.reshape(grid.shape)
        for axis in range(grid.dim):
            if np.any(np.take(F, 0, axis=axis)) or np.any(np.take(F, -1, axis=axis)):
                return True
        return False
    return True


# -----------------------
# Distribution function / rearrangement
# -----------------------
def distribution_function(f: SampledFunction, t: float) -> float:
    """d_f(t) = |{|f| > t}|."""
    if t < 0:
        raise InvalidRange(f"distribution threshold must be >= 0, got {t}")
    st = staircase(f)
    above = int(np.searchsorted(-st.levels, -t, side="left"))  # levels > t
    return float(st.mass[above - 1]) if above > 0 else 0.0


def decreasing_rearrangement(f: SampledFunction, s: float) -> float:
    """f*(s) = inf{t >= 0 : d_f(t) <= s}; right-continuous and nonincreasing."""
    if not s > 0:
        raise InvalidRange(f"rearrangement argument must be > 0, got {s}")
    st = staircase(f)
    m = int(np.searchsorted(st.mass, s, side="right"))
    return float(st.levels[m]) if m < st.levels.size else 0.0


# -----------------------
# Quasinorm
# -----------------------
def _segment_terms(st: Staircase, idx: LorentzIndex) -> np.ndarray:
    p, q = idx.p, idx.q
    return st.levels ** q * (p / q) * (st.mass ** (q / p) - st.previous_mass ** (q / p))


def _cumulative(st: Staircase, idx: LorentzIndex, edges: np.ndarray) -> np.ndarray:
    """J(s) = int_0^s (u^{1/p} f*(u))^q du/u at each edge."""
    p, q = idx.p, idx.q
    terms = _segment_terms(st, idx)
    full = np.concatenate([[0.0], np.cumsum(terms)])
    k = np.searchsorted(st.mass, edges, side="right")
    out = full[k].copy()
    partial = k < st.levels.size
    kp = k[partial]
    prev = st.previous_mass[kp]
    out[partial] += st.levels[kp] ** q * (p / q) * (edges[partial] ** (q / p) - prev ** (q / p))
    return out


def _block_edges(lo: float, hi: float, from_low: bool) -> np.ndarray:
    edges = []
    for b in range(END_BLOCKS + 1):
        e = lo * 2.0 ** b if from_low else hi * 2.0 ** (-b)
        if e < lo * (1 - 1e-12) or e > hi * (1 + 1e-12):
            break
        edges.append(e)
    return np.asarray(edges)


def _block_sup(st: Staircase, idx: LorentzIndex, a: float, b: float) -> float:
    first = int(np.searchsorted(st.mass, a, side="right"))
    last = int(np.searchsorted(st.mass, b, side="left"))
    last = min(last, st.levels.size - 1)
    if first > last:
        return 0.0
    k = np.arange(first, last + 1)
    return float(np.max(st.levels[k] * np.minimum(st.mass[k], b) ** (1.0 / idx.p)))


def _end_ratios(st: Staircase, idx: LorentzIndex, from_low: bool) -> List[float]:
    lo, hi = float(st.mass[0]), float(st.mass[-1])
    edges = _block_edges(lo, hi, from_low)
    if edges.size < 3:
        return []
    pairs = list(zip(edges[:-1], edges[1:]))
    if idx.weak:
        blocks = [_block_sup(st, idx, min(a, b), max(a, b)) for a, b in pairs]
    else:
        J = _cumulative(st, idx, edges)
        blocks = list(np.abs(np.diff(J)))
    ratios = []
    for end, nxt in zip(blocks[:-1], blocks[1:]):
        if nxt <= 0:
            return []
        ratios.append(end / nxt)
    return ratios


def _check_divergence(f: SampledFunction, st: Staircase, idx: LorentzIndex) -> None:
    ends = []
    # on a plateau f* stays bounded as s -> 0; a mirrored pair of peaks does not count
    if st.top_nodes < FLAT_TOP_NODES:
        ends.append(("singular", True))
    if reaches_edge(f):
        ends.append(("tail", False))
    for end, from_low in ends:
        ratios = _end_ratios(st, idx, from_low)
        if not ratios:
            continue
        if idx.weak:
            diverges = min(ratios) > WEAK_GROWTH_MIN
        else:
            diverges = min(ratios) >= FINITE_RATIO_MAX
        if diverges:
            logger.debug("quasinorm %s diverges at the %s end (block ratios %s)", idx, end, ratios)
            raise DivergentNorm(
                f"quasinorm {idx} diverges at the {end} end (block ratios {np.round(ratios, 4).tolist()})",
                index=idx, end=end,
            )


def quasinorm(f: SampledFunction, idx: LorentzIndex, check_divergence: bool = True) -> float:
    st = staircase(f)
    if st.empty:
        return 0.0
    if check_divergence:
        _check_divergence(f, st, idx)
    if idx.weak:
        value = float(np.max(st.levels * st.mass ** (1.0 / idx.p)))
    else:
        total = float(np.sum(_segment_terms(st, idx)))
        value = total ** (1.0 / idx.q)
    if not math.isfinite(value):
        raise NumericOverflow(f"quasinorm {idx} overflowed")
    return value


def lp_norm(f: SampledFunction, p: float) -> float:
    """(int |f|^p)^{1/p} by direct quadrature of the same measure."""
    values, masses = f.as_measure()
    if not np.all(np.isfinite(values)):
        raise NumericOverflow("non-finite samples in an L^p computation")
    return float(np.sum(np.abs(values) ** p * masses) ** (1.0 / p))


# -----------------------
# Constants
# -----------------------
def kernel_weak_norm(n: int) -> float:
    """|| |x|^{-(n-2)} ||_{n/(n-2), inf} = |B(0,1)|^{(n-2)/n}."""
    return unit_ball_volume(n) ** ((n - 2.0) / n)


def indicator_norm(volume: float, idx: LorentzIndex) -> float:
    if idx.weak:
        return volume ** (1.0 / idx.p)
    return (idx.p / idx.q) ** (1.0 / idx.q) * volume ** (1.0 / idx.p)


def quasi_triangle_constant(idx: LorentzIndex) -> float:
    return 2.0 ** (1.0 / idx.p) * max(1.0, 2.0 ** (idx.inverse_q - 1.0))


def holder_constant(idx_out: LorentzIndex) -> float:
    """(fg)*(s) <= f*(s/2) g*(s/2) costs a factor 2^{1/p} on the product."""
    return 2.0 ** (1.0 / idx_out.p)


def inclusion_constant(p: float, q1: float, q2: float) -> float:
    """||f||_{p,q2} <= c ||f||_{p,q1} for q1 < q2."""
    if not q1 < q2:
        raise InvalidRange("inclusion constant needs q1 < q2")
    inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
    return (q1 / p) ** (1.0 / q1 - inv_q2)


# -----------------------
# Inequalities
# -----------------------
def holder_product_bound(f: SampledFunction, g: SampledFunction,
                         idx_f: LorentzIndex, idx_g: LorentzIndex,
                         idx_out: LorentzIndex) -> Tuple[float, float]:
    if not same_grid(f.grid, g.grid):
        raise GridMismatch("Hölder product needs both factors on one grid")
    if abs(1.0 / idx_out.p - (1.0 / idx_f.p + 1.0 / idx_g.p)) > EXPONENT_TOL:
        raise ExponentMismatch(f"1/p mismatch: {idx_out} vs {idx_f} x {idx_g}")
    if abs(idx_out.inverse_q - (idx_f.inverse_q + idx_g.inverse_q)) > EXPONENT_TOL:
        raise ExponentMismatch(f"1/q mismatch: {idx_out} vs {idx_f} x {idx_g}")
    lhs = quasinorm(f * g, idx_out)
    rhs = quasinorm(f, idx_f) * quasinorm(g, idx_g)
    return lhs, rhs


def interpolation_membership(f: SampledFunction, p0: float, p1: float,
                             p: float, q: float) -> float:
    """
    ||f||_{p,q} for p0 < p < p1, computed once the two weak endpoint norms
    are known to be finite.
    """
    if not (0 < p0 < p < p1):
        raise InvalidRange(f"need 0 < p0 < p < p1, got {p0}, {p}, {p1}")
    low = quasinorm(f, LorentzIndex(p0, math.inf))
    high = quasinorm(f, LorentzIndex(p1, math.inf))
    value = quasinorm(f, LorentzIndex(p, q))
    logger.debug("interpolation: ||f||_(%g,inf)=%g, ||f||_(%g,inf)=%g -> ||f||_(%g,%g)=%g",
                 p0, low, p1, high, p, q, value)
    return value
