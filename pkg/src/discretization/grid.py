# src/discretization/grid.py
"""
Grids, quadrature weights and sampled-function arithmetic.

Three grid kinds:
 - RadialGrid: log-spaced radii with shell-volume weights (radial and zonal
   functions, i.e. u(r) times a fixed angular profile)
 - TensorGrid: uniform, origin-centred lattice with spacing h
 - PointSet: bare target points (extensions, tail profiles), no quadrature

Every other module integrates through `integrate` or consumes the discrete
measure returned by `SampledFunction.as_measure`.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import eval_gegenbauer, gegenbauer, roots_gegenbauer

from src.errors import GridMismatch, InvalidRange

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
ANGULAR_NODES = 64          # Gauss-Gegenbauer nodes used to expand zonal functions
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


# -----------------------
# Geometry helpers
# -----------------------
def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(n: int) -> float:
    """omega_{n-1} = n |B(0,1)|, the area of the unit sphere in R^n."""
    return n * unit_ball_volume(n)


def harmonic_dimension(n: int, ell: int) -> int:
    """Number of independent degree-ell spherical harmonics in R^n."""
    if ell < 0:
        raise InvalidRange(f"channel must be >= 0, got {ell}")
    lower = math.comb(n + ell - 3, ell - 2) if ell >= 2 else 0
    return math.comb(n + ell - 1, ell) - lower


def gegenbauer_index(n: int) -> float:
    return (n - 2) / 2.0


def zonal_profile(ell: int, n: int, t) -> np.ndarray:
    """Theta_ell(t) = C_ell(t) / C_ell(1); Theta_0 = 1 and Theta_1(t) = t."""
    t = np.asarray(t, dtype=float)
    if ell == 0:
        return np.ones_like(t)
    lam = gegenbauer_index(n)
    return eval_gegenbauer(ell, lam, t) / eval_gegenbauer(ell, lam, 1.0)


@lru_cache(maxsize=None)
def zonal_coefficients(ell: int, n: int) -> Tuple[float, ...]:
    """Monomial coefficients of Theta_ell, lowest power first."""
    if ell == 0:
        return (1.0,)
    lam = gegenbauer_index(n)
    poly = gegenbauer(ell, lam)
    coeffs = np.asarray(poly.coeffs, dtype=float)[::-1] / float(poly(1.0))
    # odd/even parity is exact; clean the rounding noise on the vanishing terms
    coeffs[(np.arange(coeffs.size) % 2) != (ell % 2)] = 0.0
    return tuple(float(c) for c in coeffs)


def sphere_monomial_integral(beta) -> float:
    """Integral of y^beta over the unit sphere S^{n-1}, n = len(beta)."""
    beta = [int(b) for b in beta]
    if any(b % 2 for b in beta):
        return 0.0
    halves = [(b + 1) / 2.0 for b in beta]
    log_val = sum(math.lgamma(h) for h in halves) - math.lgamma(sum(halves))
    return 2.0 * math.exp(log_val)


def stencil_directions(n: int) -> np.ndarray:
    """Normalized nonzero vectors of {-1,0,1}^n (26 directions for n=3)."""
    dirs = [d for d in itertools.product((-1, 0, 1), repeat=n) if any(d)]
    arr = np.asarray(dirs, dtype=float)
    return arr / np.linalg.norm(arr, axis=1)[:, None]


def sphere_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Near-uniform unit vectors: Fibonacci lattice in 3D, seeded Gaussians otherwise."""
    if count < 1:
        raise InvalidRange("direction count must be positive")
    if n == 3:
        i = np.arange(count, dtype=float) + 0.5
        z = 1.0 - 2.0 * i / count
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = GOLDEN_ANGLE * np.arange(count)
        return np.column_stack([z, rho * np.cos(phi), rho * np.sin(phi)])
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1)[:, None]


# -----------------------
# Grid kinds
# -----------------------
class Symmetry(str, Enum):
    RADIAL = "radial"
    ZONAL = "zonal"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray     # strictly increasing radii
    weights: np.ndarray   # quadrature for int_0^inf f(r) r^{n-1} dr
    dim: int
    log_step: float

    def __post_init__(self):
        if self.dim < 3:
            raise InvalidRange(f"dim must be >= 3, got {self.dim}")
        if np.any(np.diff(self.nodes) <= 0) or self.nodes[0] <= 0:
            raise InvalidRange("radial nodes must be positive and strictly increasing")
        if np.any(self.weights < 0):
            raise InvalidRange("radial weights must be nonnegative")

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def resolution(self) -> float:
        return self.log_step

    @cached_property
    def cell_edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower/upper radii of the log-midpoint cells; first starts at 0, last ends at r_max."""
        half = math.exp(self.log_step / 2.0)
        lower = self.nodes / half
        upper = self.nodes * half
        lower[0] = 0.0
        upper[-1] = self.nodes[-1]
        lower[1:] = upper[:-1]
        return lower, upper

    def same_as(self, other) -> bool:
        return other is self or (
            isinstance(other, RadialGrid) and other.dim == self.dim
            and other.size == self.size and np.array_equal(other.nodes, self.nodes)
        )


@dataclass(frozen=True, eq=False)
class TensorGrid:
    h: float
    half_count: int
    dim: int

    def __post_init__(self):
        if self.dim < 3:
            raise InvalidRange(f"dim must be >= 3, got {self.dim}")
        if not self.h > 0 or self.half_count < 1:
            raise InvalidRange("tensor grid needs h > 0 and at least one node per half-axis")

    @cached_property
    def axis(self) -> np.ndarray:
        # h * (-k..k): negation is exact, so the lattice is bitwise symmetric
        return self.h * np.arange(-self.half_count, self.half_count + 1, dtype=float)

    @property
    def extent(self) -> float:
        return self.h * self.half_count

    @property
    def shape(self) -> Tuple[int, ...]:
        return (2 * self.half_count + 1,) * self.dim

    @property
    def size(self) -> int:
        return (2 * self.half_count + 1) ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def resolution(self) -> float:
        return self.h

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points ** 2, axis=1))

    def same_as(self, other) -> bool:
        return other is self or (
            isinstance(other, TensorGrid) and other.dim == self.dim
            and other.h == self.h and other.half_count == self.half_count
        )


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    dim: int

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def resolution(self) -> float:
        return float("nan")

    @cached_property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points ** 2, axis=1))

    def same_as(self, other) -> bool:
        return other is self or (
            isinstance(other, PointSet) and np.array_equal(other.points, self.points)
        )


Grid = Union[RadialGrid, TensorGrid, PointSet]


def make_log_radial_grid(r_min: float, r_max: float, count: int, dim: int) -> RadialGrid:
    """
    Geometric nodes r_min * (r_max/r_min)^(k/(count-1)).

    Weights are the exact volumes (without the sphere factor) of the cells
    [r e^{-D/2}, r e^{+D/2}], D the log spacing, with the first cell starting
    at 0 and the last one ending at r_max. Integrating 1 reproduces
    r_max^n / n up to rounding; smooth integrands converge like D^2.
    """
    if not (0 < r_min < r_max) or count < 8 or dim < 3:
        raise InvalidRange(
            f"need 0 < r_min < r_max, count >= 8, dim >= 3 (got {r_min}, {r_max}, {count}, {dim})"
        )
    log_step = math.log(r_max / r_min) / (count - 1)
    nodes = r_min * np.exp(log_step * np.arange(count))
    nodes[-1] = r_max
    half = math.exp(log_step / 2.0)
    upper = nodes * half
    upper[-1] = r_max
    lower = np.concatenate([[0.0], upper[:-1]])
    weights = (upper ** dim - lower ** dim) / dim
    return RadialGrid(nodes=nodes, weights=weights, dim=dim, log_step=log_step)


def make_tensor_grid(h: float, half_width: float, dim: int) -> TensorGrid:
    if not h > 0 or not half_width > 0:
        raise InvalidRange("tensor grid needs h > 0 and half_width > 0")
    return TensorGrid(h=float(h), half_count=max(1, int(round(half_width / h))), dim=dim)


def same_grid(a: Grid, b: Grid) -> bool:
    return a.same_as(b)


# -----------------------
# Sampled functions
# -----------------------
@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    symmetry: Symmetry = Symmetry.GENERAL
    channel: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "symmetry", Symmetry(self.symmetry))
        if values.size != self.grid.size:
            raise GridMismatch(f"{values.size} samples for a grid of {self.grid.size} nodes")
        radial_grid = isinstance(self.grid, RadialGrid)
        if radial_grid == (self.symmetry == Symmetry.GENERAL):
            raise GridMismatch(f"symmetry '{self.symmetry.value}' does not fit {type(self.grid).__name__}")
        if self.symmetry == Symmetry.ZONAL and self.channel < 1:
            raise InvalidRange("zonal functions need a channel >= 1")
        if self.symmetry != Symmetry.ZONAL and self.channel != 0:
            raise InvalidRange("only zonal functions carry a nonzero channel")

    # ---- construction helpers
    @classmethod
    def radial(cls, grid: RadialGrid, values) -> "SampledFunction":
        return cls(grid, values, Symmetry.RADIAL)

    @classmethod
    def zonal(cls, grid: RadialGrid, values, channel: int) -> "SampledFunction":
        if channel == 0:
            return cls(grid, values, Symmetry.RADIAL)
        return cls(grid, values, Symmetry.ZONAL, channel)

    @classmethod
    def zeros_like(cls, f: "SampledFunction") -> "SampledFunction":
        return f.with_values(np.zeros_like(f.values))

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.symmetry, self.channel)

    def abs(self) -> "SampledFunction":
        return self.with_values(np.abs(self.values))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    # ---- arithmetic
    def _check_grid(self, other: "SampledFunction"):
        if not same_grid(self.grid, other.grid):
            raise GridMismatch("operands are sampled on different grids")

    def __mul__(self, other):
        if not isinstance(other, SampledFunction):
            return self.with_values(self.values * float(other))
        self._check_grid(other)
        if self.symmetry == Symmetry.ZONAL and other.symmetry == Symmetry.ZONAL:
            raise GridMismatch("the product of two zonal channels is not a single channel")
        lead = self if self.symmetry == Symmetry.ZONAL else other
        return SampledFunction(self.grid, self.values * other.values, lead.symmetry, lead.channel)

    __rmul__ = __mul__

    def _combine(self, other, sign: float):
        self._check_grid(other)
        if (self.symmetry, self.channel) != (other.symmetry, other.channel):
            raise GridMismatch("cannot add functions from different angular channels")
        return self.with_values(self.values + sign * other.values)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self.with_values(-self.values)

    # ---- measure view
    def as_measure(self, angular_nodes: int = ANGULAR_NODES) -> Tuple[np.ndarray, np.ndarray]:
        """(values, masses) of the point-mass measure used by the Lorentz toolkit."""
        grid = self.grid
        if isinstance(grid, TensorGrid):
            return self.values, np.full(self.values.size, grid.cell_volume)
        if isinstance(grid, RadialGrid):
            n = grid.dim
            if self.symmetry == Symmetry.RADIAL:
                return self.values, grid.weights * sphere_area(n)
            t, mu = roots_gegenbauer(angular_nodes, gegenbauer_index(n))
            band = sphere_area(n - 1) * mu
            theta = zonal_profile(self.channel, n, t)
            values = np.outer(self.values, theta).ravel()
            masses = np.outer(grid.weights, band).ravel()
            return values, masses
        raise GridMismatch("point sets carry no quadrature weights")


# -----------------------
# Point clouds
# -----------------------
@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray    # (m, n)
    volumes: np.ndarray   # cell volume per point
    values: np.ndarray
    source: np.ndarray    # flat index into the originating grid


def point_cloud(f: SampledFunction, directions: Optional[np.ndarray] = None,
                nonzero_only: bool = True) -> PointCloud:
    """f as a weighted point cloud: tensor nodes, or radial shells times directions."""
    grid = f.grid
    if isinstance(grid, TensorGrid):
        idx = np.flatnonzero(f.values) if nonzero_only else np.arange(grid.size)
        return PointCloud(grid.points[idx], np.full(idx.size, grid.cell_volume),
                          f.values[idx], idx)
    if isinstance(grid, RadialGrid):
        if directions is None:
            raise InvalidRange("radial functions need a direction set to form a cloud")
        n = grid.dim
        shells = np.flatnonzero(f.values) if nonzero_only else np.arange(grid.size)
        d = directions.shape[0]
        points = (grid.nodes[shells][:, None, None] * directions[None, :, :]).reshape(-1, n)
        volumes = np.repeat(grid.weights[shells] * sphere_area(n) / d, d)
        theta = zonal_profile(f.channel, n, directions[:, 0])
        values = (f.values[shells][:, None] * theta[None, :]).ravel()
        return PointCloud(points, volumes, values, np.repeat(shells, d))
    raise GridMismatch("point sets carry no cell volumes")


# -----------------------
# Operations
# -----------------------
def integrate(f: SampledFunction) -> float:
    """Quadrature of the integral of f over the grid's extent."""
    if not np.all(np.isfinite(f.values)):
        raise InvalidRange("cannot integrate non-finite samples")
    grid = f.grid
    if isinstance(grid, TensorGrid):
        F = f.values.reshape(grid.shape)
        mirrored = F[tuple(slice(None, None, -1) for _ in range(grid.dim))]
        sym = 0.5 * (F + mirrored)
        return float(np.sum(sym) * grid.cell_volume)
    if isinstance(grid, RadialGrid):
        if f.symmetry == Symmetry.ZONAL:
            return 0.0  # Theta_ell, ell >= 1, averages to zero over the sphere
        return float(sphere_area(grid.dim) * np.sum(f.values * grid.weights))
    raise GridMismatch("point sets carry no quadrature weights")


def laplacian_residual(psi: SampledFunction, V: SampledFunction) -> float:
    """
    Relative discrete residual ||(-Delta_h + V) psi|| / ||psi|| on interior
    nodes, second-order centred stencil.
    """
    if not isinstance(psi.grid, TensorGrid) or not same_grid(psi.grid, V.grid):
        raise GridMismatch("laplacian_residual needs psi and V on the same tensor grid")
    grid = psi.grid
    n = grid.dim
    F = psi.values.reshape(grid.shape)
    P = V.values.reshape(grid.shape)
    inner = tuple(slice(1, -1) for _ in range(n))
    lap = np.zeros_like(F[inner])
    for axis in range(n):
        fwd = list(inner)
        bwd = list(inner)
        fwd[axis] = slice(2, None)
        bwd[axis] = slice(None, -2)
        lap += F[tuple(fwd)] + F[tuple(bwd)] - 2.0 * F[inner]
    lap /= grid.h ** 2
    residual = -lap + P[inner] * F[inner]
    scale = np.linalg.norm(F[inner])
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(residual) / scale)
