# src/potentials/catalogue.py
"""
Potential catalogue.

Inverse-design families come with closed-form zero states: choosing psi and
setting V = Delta psi / psi gives

    inverse_design_radial   V = -a n(n-2) / (1+r^2)^2,  psi = (1+r^2)^{-(n-2)/2}
    inverse_design_dipole   V = -a n(n+2) / (1+r^2)^2,  psi = x_1 (1+r^2)^{-n/2}

with a = 1 (any other amplitude detunes the state away). The dipole
potential also carries the radial state (1-r^2)(1+r^2)^{-n/2}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

from src.discretization.grid import (
    Grid,
    RadialGrid,
    SampledFunction,
    Symmetry,
    TensorGrid,
    zonal_profile,
)
from src.errors import GridMismatch, InvalidRange, UnknownPotentialKind

logger = logging.getLogger(__name__)


class PotentialKind(str, Enum):
    INVERSE_DESIGN_RADIAL = "inverse_design_radial"
    INVERSE_DESIGN_DIPOLE = "inverse_design_dipole"
    COMPACT_BUMP = "compact_bump"
    SQUARE_WELL = "square_well"
    INVERSE_SQUARE_TAIL = "inverse_square_tail"
    CUSTOM_SAMPLES = "custom_samples"


def parse_kind(kind: Union[str, PotentialKind]) -> PotentialKind:
    try:
        return PotentialKind(kind)
    except ValueError:
        known = ", ".join(k.value for k in PotentialKind)
        raise UnknownPotentialKind(f"unknown potential kind '{kind}' (known: {known})") from None


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    kind: PotentialKind
    dim: int
    params: Tuple[float, ...] = ()      # [amplitude, width]
    samples: Optional[SampledFunction] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.dim < 3:
            raise InvalidRange(f"dim must be >= 3, got {self.dim}")
        if self.kind == PotentialKind.CUSTOM_SAMPLES:
            if self.samples is None:
                raise InvalidRange("custom_samples needs sampled values")
            if self.samples.dim != self.dim:
                raise GridMismatch("custom samples live in a different dimension")
        if self.width <= 0:
            raise InvalidRange("potential width must be positive")

    @property
    def amplitude(self) -> float:
        return self.params[0] if self.params else 1.0

    @property
    def width(self) -> float:
        return self.params[1] if len(self.params) > 1 else 1.0

    @property
    def is_radial(self) -> bool:
        if self.kind == PotentialKind.CUSTOM_SAMPLES:
            return self.samples.symmetry == Symmetry.RADIAL
        return True


def inverse_design_strength(kind: PotentialKind, n: int) -> float:
    if kind == PotentialKind.INVERSE_DESIGN_RADIAL:
        return float(n * (n - 2))
    if kind == PotentialKind.INVERSE_DESIGN_DIPOLE:
        return float(n * (n + 2))
    raise InvalidRange(f"{kind.value} is not an inverse-design family")


def radial_profile(spec: PotentialSpec, r) -> np.ndarray:
    """V as a function of |x| for the radial kinds."""
    r = np.asarray(r, dtype=float)
    n, a, w = spec.dim, spec.amplitude, spec.width
    kind = spec.kind
    if kind in (PotentialKind.INVERSE_DESIGN_RADIAL, PotentialKind.INVERSE_DESIGN_DIPOLE):
        return -a * inverse_design_strength(kind, n) / (1.0 + r * r) ** 2
    if kind == PotentialKind.COMPACT_BUMP:
        out = np.zeros_like(r)
        inside = r < w
        s = (r[inside] / w) ** 2
        out[inside] = a * np.exp(1.0 - 1.0 / (1.0 - s))
        return out
    if kind == PotentialKind.SQUARE_WELL:
        return np.where(r < w, a, 0.0)
    if kind == PotentialKind.INVERSE_SQUARE_TAIL:
        return a / (1.0 + r * r)
    if kind == PotentialKind.CUSTOM_SAMPLES and spec.samples.symmetry == Symmetry.RADIAL:
        grid = spec.samples.grid
        return np.interp(r, grid.nodes, spec.samples.values, right=0.0)
    raise GridMismatch(f"{kind.value} has no radial profile")


def _custom_at_points(spec: PotentialSpec, points: np.ndarray) -> np.ndarray:
    grid = spec.samples.grid
    if isinstance(grid, TensorGrid):
        idx = np.rint(points / grid.h).astype(int) + grid.half_count
        inside = np.all((idx >= 0) & (idx <= 2 * grid.half_count), axis=1)
        flat = np.zeros(points.shape[0], dtype=int)
        flat[inside] = np.ravel_multi_index(idx[inside].T, grid.shape)
        return np.where(inside, spec.samples.values[flat], 0.0)
    return radial_profile(spec, np.linalg.norm(points, axis=1))


def evaluate(spec: PotentialSpec, x):
    """Pointwise V(x); x is one point (n,) or a stack (m, n)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != spec.dim:
        raise GridMismatch(f"points of dimension {pts.shape[1]} for a {spec.dim}-D potential")
    if spec.kind == PotentialKind.CUSTOM_SAMPLES:
        out = _custom_at_points(spec, pts)
    else:
        out = radial_profile(spec, np.linalg.norm(pts, axis=1))
    return float(out[0]) if single else out


def sample(spec: PotentialSpec, grid: Grid) -> SampledFunction:
    if spec.samples is not None and spec.samples.grid.same_as(grid):
        return spec.samples
    if grid.dim != spec.dim:
        raise GridMismatch("grid and potential dimensions differ")
    if isinstance(grid, RadialGrid):
        if not spec.is_radial:
            raise GridMismatch("a non-radial potential cannot be sampled on a radial grid")
        return SampledFunction.radial(grid, radial_profile(spec, grid.nodes))
    return SampledFunction(grid, evaluate(spec, grid.points))


# -----------------------
# Closed-form zero states
# -----------------------
@dataclass(frozen=True)
class OracleState:
    channel: int
    dim: int
    profile: Callable[[np.ndarray], np.ndarray]   # u(r); psi = u(r) Theta_channel(x_1/r)

    def on_radial(self, grid: RadialGrid) -> SampledFunction:
        return SampledFunction.zonal(grid, self.profile(grid.nodes), self.channel)

    def at_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(points, axis=1)
        t = points[:, 0] / np.where(r > 0, r, 1.0)
        return self.profile(r) * zonal_profile(self.channel, self.dim, t)

    def on_grid(self, grid: Grid) -> SampledFunction:
        if isinstance(grid, RadialGrid):
            return self.on_radial(grid)
        return SampledFunction(grid, self.at_points(grid.points))


def oracle_state(spec: PotentialSpec) -> Optional[OracleState]:
    """The closed-form state of an undetuned inverse-design potential, else None."""
    n = spec.dim
    if spec.amplitude != 1.0:
        return None
    if spec.kind == PotentialKind.INVERSE_DESIGN_RADIAL:
        return OracleState(0, n, lambda r: (1.0 + r * r) ** (-(n - 2) / 2.0))
    if spec.kind == PotentialKind.INVERSE_DESIGN_DIPOLE:
        return OracleState(1, n, lambda r: r * (1.0 + r * r) ** (-n / 2.0))
    return None


def breathing_state(n: int) -> OracleState:
    """Radial zero state of the dipole-family potential."""
    return OracleState(0, n, lambda r: (1.0 - r * r) * (1.0 + r * r) ** (-n / 2.0))


def oracle_for_channel(spec: PotentialSpec, channel: int) -> Optional[OracleState]:
    state = oracle_state(spec)
    if state is not None and state.channel == channel:
        return state
    if (spec.kind == PotentialKind.INVERSE_DESIGN_DIPOLE and spec.amplitude == 1.0
            and channel == 0):
        return breathing_state(spec.dim)
    return None
