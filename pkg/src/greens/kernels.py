# src/greens/kernels.py
"""
Free kernel of the Laplacian and its two discretizations.

 - CloudLayer: point cloud with cell volumes. A cell is replaced by a
   uniform ball of the same volume, whose potential is known exactly
   (kappa*vol/d^{n-2} outside, rho^2/(2(n-2)) - d^2/(2n) inside), which also
   covers the self-cell singularity.
 - ChannelLayer: angular channel ell on a radial grid, kernel
   r_<^ell r_>^{-(ell+n-2)} / (2 ell + n - 2) integrated exactly over each
   shell against s^{n-1} ds.

Both expose `rows(targets)`: the integral of the kernel over every cell,
one row per target (points for clouds, radii for channels).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from src.discretization.grid import RadialGrid, sphere_area, unit_ball_volume
from src.errors import CoincidentPoints, InvalidRange
from src.utils import map_row_blocks

logger = logging.getLogger(__name__)

TINY_RADIUS = 1e-8          # targets closer to the origin are moved out to this fraction of r_min
ROW_BLOCK = 256


def fundamental_constant(n: int) -> float:
    """kappa_n = 1 / ((n-2) omega_{n-1}); -Delta(kappa_n |x|^{2-n}) = delta."""
    return 1.0 / ((n - 2) * sphere_area(n))


@dataclass(frozen=True)
class KernelConstant:
    dim: int
    kappa: float
    c_reciprocal: float      # n(n-2)|B(0,1)|, the reciprocal of kappa

    @classmethod
    def for_dim(cls, n: int) -> "KernelConstant":
        if n < 3:
            raise InvalidRange(f"dim must be >= 3, got {n}")
        c = n * (n - 2) * unit_ball_volume(n)
        return cls(dim=n, kappa=1.0 / c, c_reciprocal=c)


def g0(x, y, n: int) -> float:
    d = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if d == 0.0:
        raise CoincidentPoints("free Green function is singular at x = y")
    return fundamental_constant(n) * d ** (2 - n)


def channel_free(r: float, s: float, n: int, ell: int) -> float:
    """Partial-wave free kernel g_ell(r, s) against the measure s^{n-1} ds."""
    if r == s:
        raise CoincidentPoints("channel kernel evaluated at r = s")
    lo, hi = min(r, s), max(r, s)
    return lo ** ell * hi ** (-(ell + n - 2)) / (2 * ell + n - 2)


def ball_potential(d: np.ndarray, volume: np.ndarray, n: int) -> np.ndarray:
    """Integral of g0(x, .) over a uniform ball of the given volume at distance d."""
    kappa = fundamental_constant(n)
    rho = (volume / unit_ball_volume(n)) ** (1.0 / n)
    with np.errstate(divide="ignore"):
        outside = kappa * volume * np.where(d > 0, d, 1.0) ** (2 - n)
    inside = rho ** 2 / (2.0 * (n - 2)) - d ** 2 / (2.0 * n)
    return np.where(d >= rho, outside, inside)


def channel_kernel(radii: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                   n: int, ell: int) -> np.ndarray:
    """Exact shell integrals of g_ell(r, s) s^{n-1} ds; rows = radii, cols = shells."""
    r = np.asarray(radii, dtype=float)[:, None]
    a = lower[None, :]
    b = upper[None, :]
    mid = np.clip(r, a, b)
    inner = r ** (-(ell + n - 2)) * (mid ** (ell + n) - a ** (ell + n)) / (ell + n)
    if ell == 2:
        outer = r ** ell * np.log(b / mid)
    else:
        outer = r ** ell * (b ** (2 - ell) - mid ** (2 - ell)) / (2 - ell)
    return (inner + outer) / (2 * ell + n - 2)


# -----------------------
# Layers
# -----------------------
@dataclass(frozen=True, eq=False)
class CloudLayer:
    points: np.ndarray      # (N, n)
    volumes: np.ndarray     # (N,)
    dim: int
    source: np.ndarray      # node index in the originating grid
    threads: Optional[int] = None

    kind = "cloud"

    @property
    def size(self) -> int:
        return int(self.volumes.size)

    def as_targets(self, targets) -> np.ndarray:
        return np.atleast_2d(np.asarray(targets, dtype=float))

    def kernel_block(self, targets: np.ndarray) -> np.ndarray:
        d = cdist(targets, self.points)
        return ball_potential(d, self.volumes[None, :], self.dim)

    def rows(self, targets) -> np.ndarray:
        targets = self.as_targets(targets)
        return map_row_blocks(lambda s: self.kernel_block(targets[s]),
                              targets.shape[0], ROW_BLOCK, self.threads)

    def free(self, x, y) -> float:
        return g0(x, y, self.dim)

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))

    @cached_property
    def node_matrix(self) -> np.ndarray:
        logger.debug("assembling %d x %d cloud kernel", self.size, self.size)
        return self.rows(self.points)


@dataclass(frozen=True, eq=False)
class ChannelLayer:
    grid: RadialGrid
    channel: int
    threads: Optional[int] = None

    kind = "channel"

    def __post_init__(self):
        if self.channel < 0:
            raise InvalidRange(f"channel must be >= 0, got {self.channel}")

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def volumes(self) -> np.ndarray:
        return self.grid.weights

    @property
    def source(self) -> np.ndarray:
        return np.arange(self.grid.size)

    @property
    def points(self) -> np.ndarray:
        return self.grid.nodes

    def as_targets(self, targets) -> np.ndarray:
        return np.atleast_1d(np.asarray(targets, dtype=float))

    def kernel_block(self, radii: np.ndarray) -> np.ndarray:
        lower, upper = self.grid.cell_edges
        radii = np.maximum(radii, TINY_RADIUS * self.grid.r_min)
        return channel_kernel(radii, lower, upper, self.dim, self.channel)

    def rows(self, targets) -> np.ndarray:
        radii = self.as_targets(targets)
        return map_row_blocks(lambda s: self.kernel_block(radii[s]),
                              radii.size, ROW_BLOCK, self.threads)

    def free(self, r, s) -> float:
        return channel_free(float(r), float(s), self.dim, self.channel)

    def distance(self, r, s) -> float:
        return abs(float(r) - float(s))

    @cached_property
    def node_matrix(self) -> np.ndarray:
        logger.debug("assembling %d x %d channel-%d kernel", self.size, self.size, self.channel)
        return self.rows(self.grid.nodes)
