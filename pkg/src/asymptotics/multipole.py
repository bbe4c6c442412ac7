# src/asymptotics/multipole.py
"""
Multipole expansion of |x - y|^{-(n-2)} for |y| < |x|.

With u = |y|/|x| and t = x_hat . y_hat,

    |x - y|^{-(n-2)} = |x|^{-(n-2)} (1 + s)^{-m},   s = u^2 - 2 t u,  m = (n-2)/2
                     ~ |x|^{-(n-2)} sum_{k+l <= N} c_kl t^{k-l} u^{k+l}

where d_k are the Taylor coefficients of (1+s)^{-m} and
c_kl = d_k binom(k, l) (-2)^{k-l}. The truncation error is bounded by
kappa_B |x-y|^{-(n-2)} (u^{N+1} + u^{N+n-2}); kappa_B is calibrated on a
deterministic (u, t) sweep.

The same sums drive the decay operator
    S phi(x) = kappa_n int_{|y|>=R} (T_N(x,y) - |x-y|^{-(n-2)}) W(y) phi(y) dy
whose B_alpha operator norm is estimated with random trial functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy.special import binom

from src.discretization.grid import (
    RadialGrid,
    SampledFunction,
    TensorGrid,
    sphere_directions,
    stencil_directions,
)
from src.errors import CoincidentPoints, GridMismatch, InvalidRange
from src.greens.kernels import fundamental_constant
from src.greens.neumann import cloud_layer
from src.potentials.decomposition import Decomposition, multi_indices, node_radii
from src.utils import map_row_blocks

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
MAX_ORDER = 2
CALIBRATION_U = np.logspace(-3.0, 3.0, 241)
CALIBRATION_T = np.linspace(-1.0, 1.0, 81)
CALIBRATION_HEADROOM = 2.0
TRIAL_DIRECTIONS = 32
TRIAL_RADII = 24
TRIAL_ANGULAR_WEIGHT = 0.5      # angular factor 1 + 0.5 a.x_hat with |a| <= 1


@dataclass(frozen=True)
class MultipoleExpansion:
    order: int
    dim: int
    d: Tuple[float, ...]
    c: Dict[Tuple[int, int], float]

    def terms(self) -> Iterator[Tuple[int, int, float]]:
        """(k, l, c_kl) with k + l <= order."""
        for (k, l), value in sorted(self.c.items()):
            if k + l <= self.order:
                yield k, l, value


def taylor_coefficients(N: int, n: int) -> Tuple[float, ...]:
    """d_k of (1+s)^{-(n-2)/2}: (-1)^k binom(m+k-1, k)."""
    m = (n - 2) / 2.0
    return tuple(float((-1) ** k * binom(m + k - 1, k)) for k in range(N + 1))


def multipole_coeffs(N: int, n: int) -> MultipoleExpansion:
    if N not in range(MAX_ORDER + 1):
        raise InvalidRange(f"multipole order must be 0, 1 or 2, got {N}")
    if n < 3:
        raise InvalidRange(f"dim must be >= 3, got {n}")
    d = taylor_coefficients(N, n)
    c = {(k, l): d[k] * math.comb(k, l) * (-2.0) ** (k - l)
         for k in range(N + 1) for l in range(k + 1)}
    return MultipoleExpansion(N, n, d, c)


def truncated_kernel(x: np.ndarray, y: np.ndarray, N: int, n: int) -> np.ndarray:
    """
    T_N(x, y) = sum c_kl |x|^{-(n-2)-(k+l)} (x_hat . y)^{k-l} |y|^{2l}; x (n,), y (m, n).
    Written without y_hat so that y = 0 is regular.
    """
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    rx = float(np.linalg.norm(x))
    proj = y @ (x / rx)
    ysq = np.sum(y * y, axis=1)
    total = np.zeros(y.shape[0])
    for k, l, c in multipole_coeffs(N, n).terms():
        total += c * rx ** (-(n - 2) - (k + l)) * proj ** (k - l) * ysq ** l
    return total


def expansion_error(x, y, N: int, n: int, kappa_b: Optional[float] = None) -> Tuple[float, float]:
    """(|T_N - |x-y|^{-(n-2)}|, kappa_B |x-y|^{-(n-2)} (u^{N+1} + u^{N+n-2}))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rx = float(np.linalg.norm(x))
    if rx == 0.0:
        raise CoincidentPoints("expansion point x must be nonzero")
    d = float(np.linalg.norm(x - y))
    if d == 0.0:
        raise CoincidentPoints("expansion is singular at x = y")
    exact = d ** (2 - n)
    lhs = abs(exact - float(truncated_kernel(x, y[None, :], N, n)[0]))
    u = float(np.linalg.norm(y)) / rx
    kappa = calibrated_kappa_b(N, n) if kappa_b is None else kappa_b
    rhs = kappa * exact * (u ** (N + 1) + u ** (N + n - 2))
    return lhs, rhs


@lru_cache(maxsize=None)
def calibrated_kappa_b(N: int, n: int) -> float:
    """Headroom times the largest lhs/rhs ratio (kappa_B = 1) on the (u, t) sweep."""
    u, t = np.meshgrid(CALIBRATION_U, CALIBRATION_T, indexing="ij")
    u = u.ravel()
    t = t.ravel()
    dist_sq = 1.0 + u * u - 2.0 * t * u
    keep = dist_sq > 1e-12
    u, t, dist_sq = u[keep], t[keep], dist_sq[keep]
    exact = dist_sq ** (-(n - 2) / 2.0)
    approx = np.zeros_like(u)
    for k, l, c in multipole_coeffs(N, n).terms():
        approx += c * t ** (k - l) * u ** (k + l)
    ratio = np.abs(exact - approx) / (exact * (u ** (N + 1) + u ** (N + n - 2)))
    kappa = CALIBRATION_HEADROOM * float(np.max(ratio))
    logger.debug("kappa_B(N=%d, n=%d) = %.6g", N, n, kappa)
    return kappa


# -----------------------
# Moments and far field
# -----------------------
def _multinomial(beta: Tuple[int, ...]) -> float:
    out = math.factorial(sum(beta))
    for b in beta:
        out //= math.factorial(b)
    return float(out)


def projected_moment(moments: Dict[Tuple[int, ...], float], direction: np.ndarray,
                     power: int, half_even: int) -> float:
    """int (x_hat . y)^power |y|^{2 half_even} V psi dy from the moment table."""
    n = direction.size
    total = 0.0
    for beta in multi_indices(n, power):
        cb = _multinomial(beta) * float(np.prod(direction ** np.asarray(beta, dtype=float)))
        if cb == 0.0:
            continue
        for gamma in multi_indices(n, half_even):
            alpha = tuple(b + 2 * g for b, g in zip(beta, gamma))
            total += cb * _multinomial(gamma) * moments[alpha]
    return total


def multipole_field(moments: Dict[Tuple[int, ...], float], x, N: int, n: int) -> float:
    """int T_N(x, y) V(y) psi(y) dy from the moments; psi(x) ~ -kappa_n times this."""
    x = np.asarray(x, dtype=float)
    rx = float(np.linalg.norm(x))
    if rx == 0.0:
        raise CoincidentPoints("far-field point must be nonzero")
    xhat = x / rx
    total = 0.0
    for k, l, c in multipole_coeffs(N, n).terms():
        total += c * rx ** (-(n - 2) - (k + l)) * projected_moment(moments, xhat, k - l, l)
    return total


def direct_multipole_sum(V: SampledFunction, psi: SampledFunction, x, N: int) -> float:
    """int T_N(x, y) V psi dy by quadrature over a tensor grid."""
    if not isinstance(V.grid, TensorGrid):
        raise GridMismatch("direct multipole sums need a tensor grid")
    P = V * psi
    kernel = truncated_kernel(np.asarray(x, dtype=float), P.grid.points, N, V.dim)
    return float(np.sum(kernel * P.values) * P.grid.cell_volume)


# -----------------------
# Decay operator
# -----------------------
def _outer_radius(W: SampledFunction) -> float:
    grid = W.grid
    if isinstance(grid, RadialGrid):
        return grid.r_max
    if isinstance(grid, TensorGrid):
        return grid.extent
    raise GridMismatch("decay operator needs a radial or tensor grid")


def contraction_estimate(dec: Decomposition, alpha: float, N: int, R: float,
                         trial_count: int = 16, seed: int = 0,
                         directions: int = TRIAL_DIRECTIONS, target_radii: int = TRIAL_RADII,
                         threads: Optional[int] = None) -> float:
    """max over trial functions of ||S phi||_{B_alpha} / ||phi||_{B_alpha}, sup taken over |x| >= R."""
    n = dec.dim
    if not any(abs(alpha - a) < 1e-12 for a in (N + n - 2, N + n - 1)):
        raise InvalidRange(f"alpha must be N+n-2 or N+n-1, got {alpha} for N={N}, n={n}")
    if R < dec.support_radius:
        raise InvalidRange(f"R={R} lies inside supp K (radius {dec.support_radius})")
    if trial_count < 1:
        raise InvalidRange("trial_count must be positive")

    W = dec.W
    r_nodes = node_radii(W)
    restricted = W.with_values(np.where(r_nodes >= R, W.values, 0.0))
    if restricted.is_zero():
        return 0.0
    dirs = sphere_directions(n, directions, seed) if isinstance(W.grid, RadialGrid) else None
    layer, weights = cloud_layer(restricted, directions=dirs, threads=threads, seed=seed)
    z = layer.points
    rz = np.linalg.norm(z, axis=1)

    r_out = _outer_radius(W)
    radii = np.geomspace(R, max(r_out, 2.0 * R), target_radii)
    stencil = stencil_directions(n)
    targets = (radii[:, None, None] * stencil[None, :, :]).reshape(-1, n)
    rt = np.linalg.norm(targets, axis=1)
    kappa = fundamental_constant(n)

    def block(s: slice) -> np.ndarray:
        free = layer.kernel_block(targets[s])
        expanded = np.vstack([truncated_kernel(x, z, N, n) for x in targets[s]])
        return kappa * expanded * layer.volumes[None, :] - free

    S = map_row_blocks(block, targets.shape[0], 64, threads)

    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trial_count):
        a = rng.uniform(-1.0, 1.0, n)
        a /= max(1.0, float(np.linalg.norm(a)))

        def trial(points: np.ndarray, radii_: np.ndarray) -> np.ndarray:
            xhat = points / radii_[:, None]
            return radii_ ** (-alpha) * (1.0 + TRIAL_ANGULAR_WEIGHT * xhat @ a)

        phi_z = trial(z, rz)
        S_phi = S @ (weights * phi_z)
        phi_t = trial(targets, rt)
        norm_phi = float(np.max(rt ** alpha * np.abs(phi_t)))
        norm_S = float(np.max(rt ** alpha * np.abs(S_phi)))
        ratios.append(norm_S / norm_phi)
    estimate = max(ratios)
    logger.info("decay operator: alpha=%g N=%d R=%g -> ||S|| ~ %.4f over %d trial functions",
                alpha, N, R, estimate, trial_count)
    return estimate


def scaled(dec: Decomposition, factor: float) -> Decomposition:
    """dec with W multiplied by `factor` (K untouched); for linearity checks."""
    return replace(dec, W=dec.W * factor)
