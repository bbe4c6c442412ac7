# src/reporting/report_writer.py
"""
Report, CSV and plot writers.

Writes (under the run's output directory):
 - report.json / verify_report.json   (schema_version, header, results, checks)
 - *.csv                              (pandas, float_format="%.17g")
 - timings.json                       (wall clock, kept out of the reports)
 - tail_profile.png                   (only with --plot)

Every inequality is stored with both sides, never as a bare boolean.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import matplotlib
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.config import SCHEMA_VERSION
from src.utils import ensure_dir, write_json

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


def check(name: str, lhs: float, rhs: float) -> Check:
    """lhs <= rhs; NaN on either side never holds."""
    lhs, rhs = float(lhs), float(rhs)
    holds = not (math.isnan(lhs) or math.isnan(rhs)) and lhs <= rhs
    if not holds:
        logger.warning("check %s failed: %.6g > %.6g", name, lhs, rhs)
    return Check(name, lhs, rhs, holds)


@dataclass
class ZeroStateReport:
    header: Dict[str, Any]
    decomposition: Dict[str, Any] = field(default_factory=dict)
    greens: Dict[str, Any] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    classification: Dict[str, Any] = field(default_factory=dict)
    norms: List[Dict[str, Any]] = field(default_factory=list)
    residuals: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)

    def add(self, c: Check) -> Check:
        self.checks.append(c)
        return c

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "header": self.header,
            "decomposition": self.decomposition,
            "greens": self.greens,
            "solver": self.solver,
            "classification": self.classification,
            "norms": self.norms,
            "residuals": self.residuals,
            "checks": [c.to_dict() for c in self.checks],
        }


def write_report(report: ZeroStateReport, path: Path) -> Path:
    out = write_json(path, report.to_dict())
    logger.info("wrote %s", out)
    return out


def write_payload(payload: Mapping[str, Any], checks: Iterable[Check], path: Path) -> Path:
    """Generic report with the versioned envelope (verify, expand)."""
    body = {"schema_version": SCHEMA_VERSION, **payload,
            "checks": [c.to_dict() for c in checks]}
    out = write_json(path, body)
    logger.info("wrote %s", out)
    return out


def write_csv(rows: List[Dict[str, Any]], path: Path, columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s (%d rows)", path, len(df))
    return path


def write_timings(timings: Dict[str, float], path: Path, threads: Optional[int] = None) -> Path:
    return write_json(path, {"threads": threads, "seconds": timings})


def plot_tail_profile(profile, alpha: Optional[float], path: Path) -> Path:
    """log-log |psi| against r with the fitted slope."""
    path = Path(path)
    ensure_dir(path.parent)
    r = profile.radii
    mags = profile.psi_max
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(r, mags, "o", ms=3, label="max |psi| on sphere")
    if alpha is not None and mags[-1] > 0:
        ref = mags[-1] * (r / r[-1]) ** (-alpha)
        ax.loglog(r, ref, "-", lw=1, label=f"fit r^-{alpha:.3f}")
    ax.set_xlabel("r")
    ax.set_ylabel("|psi|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def print_table(rows: List[Dict[str, Any]]) -> None:
    if rows:
        print(pd.DataFrame(rows).to_string(index=False))
