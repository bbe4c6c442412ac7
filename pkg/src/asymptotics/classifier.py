# src/asymptotics/classifier.py
"""
Far-field analysis of a zero state.

Reads:
  - a solved ZeroState, its Decomposition and evaluator
  - the tail radii at which the state is extended

Writes:
  - TailProfile (radii x stencil directions), limit of r^{n-2} psi, fitted
    decay exponent, moments and the resulting Classification

Behavior:
  - n >= 5: every zero state is an eigenfunction
  - n in {3, 4}: resonance exactly when int V psi does not vanish
  - decay class n-2, n-1, n or n+1 from the lowest non-vanishing moment
    order, cross-checked against the fitted exponent
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from src.discretization.grid import SampledFunction, stencil_directions
from src.errors import DegenerateFit, DivergentNorm, InconsistentClassification, InsufficientTail, InvalidRange
from src.greens.kernels import fundamental_constant
from src.greens.neumann import GreensEvaluator
from src.lorentz.quasinorm import LorentzIndex, quasinorm
from src.potentials.decomposition import Decomposition, max_abs_moment, moment_scale, moments
from src.utils import multi_index_label
from src.zerostate.solver import ZeroState, extend

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Tunables
# -----------------------
TAIL_R_LO = 10.0
TAIL_R_HI = 100.0
TAIL_COUNT = 24
MIN_TAIL_RADII = 8
LIMIT_WINDOW_DECADES = 0.5      # limit fit uses [r_max / 10^0.5, r_max]
DECAY_WINDOW = (0.25, 0.9)      # decay fit uses [r_max/4, 0.9 r_max]
CLASS_TOLERANCE = 0.3
MOMENT_TOL_FACTOR = 10.0        # default tol = 10 * resolution^2 * int |V psi|


@dataclass(frozen=True, eq=False)
class TailProfile:
    radii: np.ndarray          # (K,)
    directions: np.ndarray     # (D, n)
    values: np.ndarray         # (K, D)

    @property
    def dim(self) -> int:
        return int(self.directions.shape[1])

    @property
    def psi_max(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=1)

    @property
    def psi_avg(self) -> np.ndarray:
        return np.mean(self.values, axis=1)

    @property
    def scaled_avg(self) -> np.ndarray:
        """r^{n-2} times the direction average."""
        return self.radii ** (self.dim - 2) * self.psi_avg

    def rows(self):
        n = self.dim
        for r, m, a, s in zip(self.radii, self.psi_max, self.psi_avg, self.scaled_avg):
            yield {"r": r, "psi_max": m, "psi_avg": a, f"r^{n - 2}psi_avg": s}

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], radii, n: int) -> "TailProfile":
        """Profile of an explicit function of points (m, n) -> (m,)."""
        radii = np.asarray(radii, dtype=float)
        dirs = stencil_directions(n)
        points = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        return cls(radii, dirs, np.asarray(fn(points), dtype=float).reshape(radii.size, -1))


def tail_radii(r_lo: float = TAIL_R_LO, r_hi: float = TAIL_R_HI, count: int = TAIL_COUNT) -> np.ndarray:
    if not (0 < r_lo < r_hi) or count < 2:
        raise InvalidRange(f"tail needs 0 < r_lo < r_hi and count >= 2 (got {r_lo}, {r_hi}, {count})")
    return np.geomspace(r_lo, r_hi, count)


def tail_profile(z: ZeroState, dec: Decomposition, ev: GreensEvaluator,
                 radii: Optional[np.ndarray] = None) -> TailProfile:
    n = dec.dim
    radii = tail_radii() if radii is None else np.asarray(radii, dtype=float)
    dirs = stencil_directions(n)
    points = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    values = extend(z, dec, ev, points).values.reshape(radii.size, dirs.shape[0])
    return TailProfile(radii, dirs, values)


# -----------------------
# Fits
# -----------------------
def _check_span(profile: TailProfile) -> None:
    r = profile.radii
    if r.size < MIN_TAIL_RADII:
        raise InsufficientTail(f"{r.size} tail radii, need at least {MIN_TAIL_RADII}")
    if r[-1] < 10.0 * r[0] * (1 - 1e-12):
        raise InsufficientTail(f"tail spans {r[0]:g}..{r[-1]:g}, less than one decade")


def limit_extract(profile: TailProfile, n: Optional[int] = None) -> Tuple[float, Dict[str, float]]:
    """A from the model r^{n-2} <psi> = A + b/r over the outer half-decade."""
    _check_span(profile)
    n = profile.dim if n is None else n
    r = profile.radii
    target = r ** (n - 2) * profile.psi_avg
    window = r >= r[-1] / 10.0 ** LIMIT_WINDOW_DECADES
    X = (1.0 / r[window])[:, None]
    y = target[window]
    model = LinearRegression().fit(X, y)
    A = float(model.intercept_)
    fit = {
        "A": A,
        "b": float(model.coef_[0]),
        "r_squared": float(r2_score(y, model.predict(X))),
        "r_lo": float(r[window][0]),
        "r_hi": float(r[window][-1]),
        "points": int(window.sum()),
    }
    logger.debug("limit fit: %s", fit)
    return A, fit


def decay_exponent(profile: TailProfile) -> Tuple[float, float]:
    """(alpha, r^2) of log max_{|x|=r}|psi| = -alpha log r + c."""
    _check_span(profile)
    r = profile.radii
    lo, hi = DECAY_WINDOW
    window = (r >= lo * r[-1]) & (r <= hi * r[-1])
    mags = profile.psi_max[window]
    if window.sum() < 3:
        raise DegenerateFit(f"only {int(window.sum())} radii inside the decay window")
    if not np.all(np.isfinite(mags)) or np.any(mags <= 0):
        raise DegenerateFit("tail magnitudes vanish or underflow inside the decay window")
    X = np.log(r[window])[:, None]
    y = np.log(mags)
    model = LinearRegression().fit(X, y)
    alpha = -float(model.coef_[0])
    return alpha, float(r2_score(y, model.predict(X)))


# -----------------------
# Classification
# -----------------------
@dataclass(frozen=True, eq=False)
class Classification:
    tag: str                              # "resonance" | "eigenfunction"
    decay_class: int
    A_limit: float
    limit_prediction: float               # -kappa_n M_0
    moments: Dict[Tuple[int, ...], float]
    moment_tols: Dict[int, float]         # per moment order
    alpha: float
    r_squared: float
    fit: Dict[str, float]
    square_integrable: bool
    l2_norm: Optional[float]
    dim: int

    @property
    def moment_tol(self) -> float:
        return self.moment_tols[0]

    def to_dict(self) -> Dict:
        return {
            "tag": self.tag,
            "decay_class": self.decay_class,
            "A_limit": self.A_limit,
            "limit_prediction": self.limit_prediction,
            "moments": {multi_index_label(a): v for a, v in self.moments.items()},
            "moment_tols": {str(k): v for k, v in self.moment_tols.items()},
            "alpha": self.alpha,
            "r_squared": self.r_squared,
            "fit": self.fit,
            "square_integrable": self.square_integrable,
            "l2_norm": self.l2_norm,
        }


def default_moment_tol(V: SampledFunction, psi: SampledFunction) -> float:
    return MOMENT_TOL_FACTOR * V.grid.resolution ** 2 * moment_scale(V, psi, 0)


def moment_tolerances(V: SampledFunction, psi: SampledFunction, tol0: float,
                      max_order: int = 2) -> Dict[int, float]:
    """tol0 for order 0, rescaled by int |y|^k |V psi| / int |V psi| for order k."""
    scale0 = moment_scale(V, psi, 0)
    out = {0: tol0}
    for k in range(1, max_order + 1):
        out[k] = tol0 * moment_scale(V, psi, k) / scale0 if scale0 > 0 else tol0
    return out


def expected_class(n: int, vanishing: Dict[int, bool]) -> int:
    cls = n - 2
    for order in (0, 1, 2):
        if not vanishing[order]:
            break
        cls += 1
    return cls


def square_integrability(psi: SampledFunction) -> Tuple[bool, Optional[float]]:
    try:
        return True, quasinorm(psi, LorentzIndex(2.0, 2.0))
    except DivergentNorm:
        return False, None


def classify(z: ZeroState, V: SampledFunction, n: int, moment_tol: Optional[float] = None, *,
             tail: TailProfile) -> Classification:
    psi = z.psi
    if n != V.dim:
        raise InvalidRange(f"dimension {n} does not match V ({V.dim})")
    ms = moments(V, psi, 2)
    tol0 = default_moment_tol(V, psi) if moment_tol is None else float(moment_tol)
    if tol0 < 0:
        raise InvalidRange(f"moment tolerance must be >= 0, got {tol0}")
    tols = moment_tolerances(V, psi, tol0)
    vanishing = {k: max_abs_moment(ms, k) <= tols[k] for k in (0, 1, 2)}

    A, fit = limit_extract(tail, n)
    alpha, r2 = decay_exponent(tail)
    prediction = -fundamental_constant(n) * ms[(0,) * n]
    decay_class = expected_class(n, vanishing)
    if n >= 5:
        tag = "eigenfunction"
    else:
        tag = "eigenfunction" if vanishing[0] else "resonance"

    top = n + 1
    consistent = alpha >= top - CLASS_TOLERANCE if decay_class == top \
        else abs(alpha - decay_class) <= CLASS_TOLERANCE
    logger.info("classify: tag=%s class=%d alpha=%.3f A=%.5f (-kappa M_0 = %.5f)",
                tag, decay_class, alpha, A, prediction)
    if not consistent:
        raise InconsistentClassification(
            f"moments give decay class {decay_class} but the fitted exponent is {alpha:.3f} "
            f"(|M_0|={abs(ms[(0,) * n]):.3e}, tol={tol0:.3e})"
        )

    in_l2, l2 = square_integrability(psi)
    return Classification(
        tag=tag, decay_class=decay_class, A_limit=A, limit_prediction=prediction,
        moments=ms, moment_tols=tols, alpha=alpha, r_squared=r2, fit=fit,
        square_integrable=in_l2, l2_norm=l2, dim=n,
    )


def relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0
