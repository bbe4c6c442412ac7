# src/greens/neumann.py
"""
Green function of -Delta + W as a truncated Neumann series.

    G = sum_{j>=0} (-1)^j G_j,   G_0 = g0,   G_j(x,y) = int g0(x,z) W(z) G_{j-1}(z,y) dz

On the nodes of a layer (see kernels.py) this is

    Gw = sum_{j<=J} (-1)^j (L D_W)^j L          L = layer kernel, D_W = diag(W)

and rows for arbitrary targets follow from the resolvent identity
Gw(x, .) = l(x) - l(x) D_W Gw. The truncation order J is the smallest one
whose geometric tail C^{J+1}/(1-C) is below `tol`, C being the contraction
measured on the discrete operator itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.discretization.grid import (
    RadialGrid,
    SampledFunction,
    Symmetry,
    TensorGrid,
    point_cloud,
    sphere_directions,
)
from src.errors import CoincidentPoints, ContractionViolated, GridMismatch, InvalidRange
from src.greens.kernels import ChannelLayer, CloudLayer, fundamental_constant, g0
from src.lorentz.quasinorm import LorentzIndex, kernel_weak_norm, quasinorm
from src.utils import map_row_blocks

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ORDER = 200
DEFAULT_PAIR_SAMPLE = 256     # columns used to measure the contraction on large clouds
DEFAULT_DIRECTIONS = 32       # sphere directions when a radial W is turned into a cloud
MEASURE_ORDERS = 4
BOUND_SLACK = 1e-9
TARGET_BLOCK = 256

Layer = Union[CloudLayer, ChannelLayer]


def truncation_order(C: float, tol: float) -> int:
    """Smallest J >= 0 with C^{J+1} / (1 - C) <= tol."""
    if not 0 <= C < 1:
        raise ContractionViolated(f"Neumann series needs C < 1, got {C:.4f}")
    if not tol > 0:
        raise InvalidRange(f"truncation tolerance must be positive, got {tol}")
    if C == 0:
        return 0
    J = max(0, math.ceil(math.log(tol * (1.0 - C)) / math.log(C)) - 1)
    while C ** (J + 1) / (1.0 - C) > tol:
        J += 1
    return J


def apriori_constant(W: SampledFunction) -> Tuple[float, float]:
    """(||W||_{n/2,1}, 2^{n-1} kappa_n ||a|| ||W||)."""
    n = W.dim
    W_norm = quasinorm(W, LorentzIndex.potential_class(n))
    return W_norm, 2.0 ** (n - 1) * fundamental_constant(n) * kernel_weak_norm(n) * W_norm


def cloud_layer(W: SampledFunction, include: Optional[np.ndarray] = None,
                directions: Optional[np.ndarray] = None, threads: Optional[int] = None,
                seed: int = 0) -> Tuple[CloudLayer, np.ndarray]:
    """
    Cloud over the nodes where W (or the optional `include` mask, e.g. supp K)
    is nonzero. Returns the layer and W at its points.
    """
    grid = W.grid
    mask = W.values != 0
    if include is not None:
        mask = mask | np.asarray(include, dtype=bool)
    if isinstance(grid, RadialGrid):
        if W.symmetry != Symmetry.RADIAL:
            raise GridMismatch("only radial W can be spread over sphere directions")
        if directions is None:
            directions = sphere_directions(grid.dim, DEFAULT_DIRECTIONS, seed)
        cloud = point_cloud(W.with_values(np.where(mask, 1.0, 0.0)), directions)
        weights = W.values[cloud.source]
    elif isinstance(grid, TensorGrid):
        cloud = point_cloud(W.with_values(np.where(mask, 1.0, 0.0)))
        weights = W.values[cloud.source]
    else:
        raise GridMismatch("point sets carry no cell volumes")
    layer = CloudLayer(cloud.points, cloud.volumes, grid.dim, cloud.source, threads)
    return layer, weights


def measure_contraction(L: np.ndarray, w: np.ndarray, columns: np.ndarray,
                        orders: int = MEASURE_ORDERS) -> float:
    """max over off-diagonal node pairs and j <= orders of (|K_j| / K_0)^{1/j}."""
    if columns.size == 0 or not np.any(w):
        return 0.0
    base = L[:, columns]
    off = np.ones(base.shape, dtype=bool)
    off[columns, np.arange(columns.size)] = False
    positive = off & (base > 0)
    P = base
    C = 0.0
    for j in range(1, orders + 1):
        P = L @ (w[:, None] * P)
        ratio = np.abs(P[positive]) / base[positive]
        if ratio.size:
            C = max(C, float(np.max(ratio)) ** (1.0 / j))
    return C


@dataclass(eq=False)
class GreensEvaluator:
    W: SampledFunction
    layer: Layer
    weights: np.ndarray          # W at the layer nodes
    J: int
    C_measured: float
    C_apriori: float
    W_norm: float
    tol: float
    _columns: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.W.dim

    @property
    def kind(self) -> str:
        return self.layer.kind

    @property
    def matrix(self) -> np.ndarray:
        return self.layer.node_matrix

    @property
    def tail_factor(self) -> float:
        C = self.C_measured
        return C ** (self.J + 1) / (1.0 - C) if C > 0 else 0.0

    def summary(self) -> Dict[str, float]:
        return {
            "kind": self.kind,
            "nodes": self.layer.size,
            "J": self.J,
            "C_measured": self.C_measured,
            "C_apriori": self.C_apriori,
            "W_norm": self.W_norm,
            "tol": self.tol,
            "tail_bound": self.tail_factor,
        }

    # ---- node-level series
    def node_series(self, block: np.ndarray) -> np.ndarray:
        """sum_{j<=J} (-1)^j (L D_W)^j applied to `block` (N x m)."""
        L = self.matrix
        w = self.weights[:, None]
        acc = block.copy()
        term = block
        for j in range(1, self.J + 1):
            term = L @ (w * term)
            acc += (-1) ** j * term
        return acc

    def resolvent_columns(self, columns: Sequence[int]) -> np.ndarray:
        """Gw[:, columns] on the layer nodes."""
        key = tuple(int(c) for c in columns)
        if key not in self._columns:
            cols = np.asarray(key, dtype=int)
            self._columns[key] = self.node_series(self.matrix[:, cols])
        return self._columns[key]

    def target_rows(self, targets, columns: Sequence[int]) -> np.ndarray:
        """Gw(x, .)[columns] for arbitrary targets via the resolvent identity."""
        cols = np.asarray(columns, dtype=int)
        G = self.resolvent_columns(cols)
        targets = self.layer.as_targets(targets)
        w = self.weights[None, :]

        def block(s: slice) -> np.ndarray:
            rows = self.layer.kernel_block(targets[s])
            return rows[:, cols] - (rows * w) @ G

        return map_row_blocks(block, targets.shape[0], TARGET_BLOCK, self.layer.threads)

    # ---- pointwise orders
    def orders(self, x, y, upto: int) -> List[float]:
        """[G_0(x,y), ..., G_upto(x,y)] with G_0 the exact free kernel."""
        if self.layer.distance(x, y) == 0.0:
            raise CoincidentPoints("Green function orders are singular at x = y")
        values = [self.layer.free(x, y)]
        if upto == 0:
            return values
        row_x = self.layer.rows(self.layer.as_targets(x))[0]
        v = self.layer.rows(self.layer.as_targets(y))[0] / self.layer.volumes
        for j in range(1, upto + 1):
            if j > 1:
                v = self.matrix @ (self.weights * v)
            values.append(float(row_x @ (self.weights * v)))
        return values


def build_evaluator(W: SampledFunction, tol: float = DEFAULT_TOL, channel: Optional[int] = None,
                    include: Optional[np.ndarray] = None, directions: Optional[np.ndarray] = None,
                    max_order: int = DEFAULT_MAX_ORDER, pair_sample: int = DEFAULT_PAIR_SAMPLE,
                    seed: int = 0, threads: Optional[int] = None) -> GreensEvaluator:
    """
    Channel evaluator when `channel` is given (radial W on a radial grid),
    cloud evaluator otherwise.
    """
    W_norm, C_apriori = apriori_constant(W)
    if channel is not None:
        if not isinstance(W.grid, RadialGrid) or W.symmetry != Symmetry.RADIAL:
            raise GridMismatch("channel evaluators need a radial W on a radial grid")
        layer: Layer = ChannelLayer(W.grid, channel, threads)
        weights = W.values.copy()
    else:
        layer, weights = cloud_layer(W, include, directions, threads, seed)

    if not np.any(weights):
        C = 0.0
    else:
        N = layer.size
        if N <= pair_sample:
            columns = np.arange(N)
        else:
            rng = np.random.default_rng(seed)
            columns = np.sort(rng.choice(N, size=pair_sample, replace=False))
        C = measure_contraction(layer.node_matrix, weights, columns)
    if C >= 1.0:
        raise ContractionViolated(f"measured contraction {C:.4f} >= 1; the Neumann series diverges")
    J = truncation_order(C, tol)
    if J > max_order:
        raise ContractionViolated(
            f"truncation order {J} exceeds max_order={max_order} at C={C:.4f}"
        )
    logger.info("greens: %s layer, %d nodes, C_measured=%.4f (a priori %.4f), J=%d",
                layer.kind, layer.size, C, C_apriori, J)
    return GreensEvaluator(W, layer, weights, J, C, C_apriori, W_norm, tol)


# -----------------------
# Pointwise operations
# -----------------------
def kernel_order(W: SampledFunction, j: int, x, y, directions: Optional[np.ndarray] = None,
                 seed: int = 0) -> float:
    """G_j(x, y) by direct quadrature of the j-fold iterated kernel."""
    if j < 0:
        raise InvalidRange(f"order must be >= 0, got {j}")
    if np.array_equal(np.asarray(x, dtype=float), np.asarray(y, dtype=float)):
        raise CoincidentPoints("Green function orders are singular at x = y")
    if j == 0 or W.is_zero():
        return g0(x, y, W.dim) if j == 0 else 0.0
    layer, weights = cloud_layer(W, directions=directions, seed=seed)
    ev = GreensEvaluator(W, layer, weights, 0, 0.0, 0.0, 0.0, 0.0)
    return ev.orders(x, y, j)[j]


def gwg_bound(W: SampledFunction, x, y, directions: Optional[np.ndarray] = None,
              seed: int = 0) -> Tuple[float, float]:
    """
    lhs = int a(x-z)|W(z)|a(z-y) dz, rhs = 2^{n-1} ||a|| ||W|| a(x-y),
    a(x) = |x|^{-(n-2)}.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise CoincidentPoints("the kernel bound is singular at x = y")
    n = W.dim
    W_norm = quasinorm(W, LorentzIndex.potential_class(n))
    rhs = 2.0 ** (n - 1) * kernel_weak_norm(n) * W_norm * float(np.linalg.norm(x - y)) ** (2 - n)
    if W.is_zero():
        return 0.0, rhs
    layer, weights = cloud_layer(W, directions=directions, seed=seed)
    kappa = fundamental_constant(n)
    rx = layer.rows(x[None, :])[0]
    ry = layer.rows(y[None, :])[0]
    lhs = float(np.sum(rx * ry * np.abs(weights) / layer.volumes)) / kappa ** 2
    return lhs, rhs


def greens(ev: GreensEvaluator, x, y) -> Tuple[float, float]:
    """
    (G(x, y), half_width) where half_width bounds the truncated tail. For
    channel evaluators x and y are radii.
    """
    terms = ev.orders(x, y, ev.J)
    value = float(sum((-1) ** j * t for j, t in enumerate(terms)))
    g = terms[0]
    half_width = ev.tail_factor * g
    bound = g / (1.0 - ev.C_measured)
    if abs(value) > bound * (1.0 + BOUND_SLACK) + half_width:
        raise ContractionViolated(
            f"|G| = {abs(value):.6g} exceeds g0/(1-C) = {bound:.6g} at x={x}, y={y}"
        )
    return value, half_width


def greens_radial(ev: GreensEvaluator, r: float, s: float) -> Tuple[float, float]:
    if ev.kind != "channel":
        raise GridMismatch("greens_radial needs a channel evaluator")
    return greens(ev, r, s)


def resolvent_residual(ev: GreensEvaluator, x, y) -> Tuple[float, float]:
    """
    |G(x,y) - (g0(x,y) - int g0(x,z) W(z) G(z,y) dz)| and the tail bound it
    must stay under.
    """
    value, half_width = greens(ev, x, y)
    v = ev.layer.rows(ev.layer.as_targets(y))[0] / ev.layer.volumes
    G_nodes = v.copy()
    term = v
    for j in range(1, ev.J + 1):
        term = ev.matrix @ (ev.weights * term)
        G_nodes += (-1) ** j * term
    row_x = ev.layer.rows(ev.layer.as_targets(x))[0]
    identity = ev.layer.free(x, y) - float(row_x @ (ev.weights * G_nodes))
    return abs(value - identity), 2.0 * half_width + BOUND_SLACK * abs(value)
