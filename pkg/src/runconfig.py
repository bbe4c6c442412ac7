# src/runconfig.py
"""
Run configuration: built-in presets, JSON config files and their validation.

A config file is JSON whose sections are merged over the chosen preset (or
over DEFAULTS when no preset is given); unknown keys are rejected so that a
typo never silently falls back to a default.
"""

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.config import DEFAULT_CONTRACTION_TARGET, DEFAULT_SEED
from src.errors import ConfigError, UnknownPotentialKind
from src.potentials.catalogue import PotentialKind, PotentialSpec, parse_kind

logger = logging.getLogger(__name__)

# -----------------------
# Defaults / Presets
# -----------------------
DEFAULTS: Dict[str, Any] = {
    "dim": 3,
    "potential": {"kind": "inverse_design_radial", "params": [1.0, 1.0], "channel": 0},
    "grid": {
        "radial": {"r_min": 1e-3, "r_max": 1e3, "count": 600},
        "tensor": {"h": 0.1, "half_width": 2.0},
    },
    "decomposition": {
        "delta": None,
        "contraction_target": DEFAULT_CONTRACTION_TARGET,
        "budget": 24,
        "radius0": 1.0,
    },
    "greens": {"tol": 1e-6, "max_order": 200, "pair_sample": 256},
    "solver": {"tol": None, "channel": None, "max_channel": 2, "method": "channel"},
    "tail": {"r_lo": 10.0, "r_hi": 100.0, "count": 24},
    "asymptotics": {"moment_tol": None, "multipole_order": 1, "trial_count": 16},
    "norms": [
        {"function": "potential", "p": "n/2", "q": 1},
        {"function": "potential", "p": "n/2", "q": "inf"},
        {"function": "inverse_power", "power": 1, "p": "n", "q": "inf"},
    ],
    "verify": {
        "pairs": 100,
        "expansion_pairs": 1000,
        "w_scale": 1.0,
        "radial": {"r_min": 0.05, "r_max": 6.0, "count": 48},
        "directions": 48,
    },
    "threads": None,
    "seed": DEFAULT_SEED,
    "plot": False,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "radial3": {"dim": 3, "potential": {"kind": "inverse_design_radial", "channel": 0}},
    "dipole3": {"dim": 3, "potential": {"kind": "inverse_design_dipole", "channel": 1}},
    "breathing3": {"dim": 3, "potential": {"kind": "inverse_design_dipole", "channel": 0}},
    "radial4": {"dim": 4, "potential": {"kind": "inverse_design_radial", "channel": 0}},
    "radial5": {"dim": 5, "potential": {"kind": "inverse_design_radial", "channel": 0}},
    "empty": {"dim": 3, "potential": {"kind": "compact_bump", "params": [0.0, 1.0], "channel": 0}},
}

NORM_FUNCTIONS = ("potential", "inverse_power", "indicator", "zero")
SOLVER_METHODS = ("channel", "cloud")


def merge(base: Dict[str, Any], override: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    """Recursive merge; lists and scalars replace, unknown keys raise ConfigError."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError("unknown configuration key", field=where)
        if isinstance(base[key], dict) and base[key] and isinstance(value, dict):
            out[key] = merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


@dataclass(frozen=True)
class RunConfig:
    data: Dict[str, Any]
    preset: Optional[str] = None

    # ---- construction
    @classmethod
    def build(cls, preset: Optional[str] = None, path: Optional[Path] = None,
              overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        base = copy.deepcopy(DEFAULTS)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset '{preset}' (known: {', '.join(PRESETS)})",
                                  field="preset")
            base = merge(base, PRESETS[preset])
        if path is not None:
            base = merge(base, load_config_file(path))
        if overrides:
            base = merge(base, overrides)
        cfg = cls(base, preset)
        cfg.validate()
        return cfg

    # ---- views
    def section(self, name: str) -> Dict[str, Any]:
        return self.data[name]

    @property
    def dim(self) -> int:
        return int(self.data["dim"])

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def threads(self) -> Optional[int]:
        value = self.data["threads"]
        return int(value) if value else None

    @property
    def plot(self) -> bool:
        return bool(self.data["plot"])

    @property
    def channel(self) -> int:
        solver_channel = self.data["solver"]["channel"]
        if solver_channel is not None:
            return int(solver_channel)
        return int(self.data["potential"]["channel"])

    def potential_spec(self) -> PotentialSpec:
        pot = self.data["potential"]
        return PotentialSpec(parse_kind(pot["kind"]), self.dim, tuple(pot["params"]))

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    # ---- validation
    def validate(self) -> None:
        d = self.data
        _require_int(d["dim"], "dim", minimum=3)
        pot = d["potential"]
        try:
            kind = parse_kind(pot["kind"])
        except UnknownPotentialKind as exc:
            raise ConfigError(str(exc), field="potential.kind") from None
        if kind == PotentialKind.CUSTOM_SAMPLES:
            raise ConfigError("custom_samples potentials are library-only", field="potential.kind")
        if not isinstance(pot["params"], list) or len(pot["params"]) > 2:
            raise ConfigError("params must be a list [amplitude, width]", field="potential.params")
        for i, value in enumerate(pot["params"]):
            _require_number(value, f"potential.params[{i}]")
        if len(pot["params"]) > 1:
            _require_positive(pot["params"][1], "potential.params[1]")
        _require_int(pot["channel"], "potential.channel", minimum=0)

        radial = d["grid"]["radial"]
        _require_positive(radial["r_min"], "grid.radial.r_min")
        _require_positive(radial["r_max"], "grid.radial.r_max")
        if radial["r_min"] >= radial["r_max"]:
            raise ConfigError("r_min must be below r_max", field="grid.radial")
        _require_int(radial["count"], "grid.radial.count", minimum=8)
        _require_positive(d["grid"]["tensor"]["h"], "grid.tensor.h")
        _require_positive(d["grid"]["tensor"]["half_width"], "grid.tensor.half_width")

        dec = d["decomposition"]
        if dec["delta"] is not None:
            _require_positive(dec["delta"], "decomposition.delta")
        _require_positive(dec["contraction_target"], "decomposition.contraction_target")
        if dec["contraction_target"] >= 0.5:
            raise ConfigError("contraction_target must stay below 1/2",
                              field="decomposition.contraction_target")
        _require_int(dec["budget"], "decomposition.budget", minimum=1)
        _require_positive(dec["radius0"], "decomposition.radius0")

        gr = d["greens"]
        _require_positive(gr["tol"], "greens.tol")
        _require_int(gr["max_order"], "greens.max_order", minimum=1)
        _require_int(gr["pair_sample"], "greens.pair_sample", minimum=1)

        sv = d["solver"]
        if sv["tol"] is not None:
            _require_positive(sv["tol"], "solver.tol")
        if sv["channel"] is not None:
            _require_int(sv["channel"], "solver.channel", minimum=0)
        _require_int(sv["max_channel"], "solver.max_channel", minimum=0)
        if sv["method"] not in SOLVER_METHODS:
            raise ConfigError(f"method must be one of {SOLVER_METHODS}", field="solver.method")

        tail = d["tail"]
        _require_positive(tail["r_lo"], "tail.r_lo")
        _require_positive(tail["r_hi"], "tail.r_hi")
        if tail["r_hi"] < 10.0 * tail["r_lo"]:
            raise ConfigError("tail must span at least one decade", field="tail")
        _require_int(tail["count"], "tail.count", minimum=8)

        asym = d["asymptotics"]
        if asym["moment_tol"] is not None:
            _require_number(asym["moment_tol"], "asymptotics.moment_tol")
        if asym["multipole_order"] not in (0, 1, 2):
            raise ConfigError("multipole_order must be 0, 1 or 2", field="asymptotics.multipole_order")
        _require_int(asym["trial_count"], "asymptotics.trial_count", minimum=1)

        if not isinstance(d["norms"], list):
            raise ConfigError("norms must be a list", field="norms")
        for i, row in enumerate(d["norms"]):
            where = f"norms[{i}]"
            if not isinstance(row, dict) or row.get("function") not in NORM_FUNCTIONS:
                raise ConfigError(f"function must be one of {NORM_FUNCTIONS}", field=where)
            for key in ("p", "q"):
                if key not in row:
                    raise ConfigError(f"missing '{key}'", field=where)

        ver = d["verify"]
        _require_int(ver["pairs"], "verify.pairs", minimum=1)
        _require_int(ver["expansion_pairs"], "verify.expansion_pairs", minimum=1)
        _require_positive(ver["w_scale"], "verify.w_scale")
        _require_int(ver["directions"], "verify.directions", minimum=4)
        _require_int(ver["radial"]["count"], "verify.radial.count", minimum=8)

        if d["threads"] is not None:
            _require_int(d["threads"], "threads", minimum=1)
        _require_int(d["seed"], "seed", minimum=0)


def _require_number(value, field: str) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=field)


def _require_positive(value, field: str) -> None:
    _require_number(value, field)
    if not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", field=field)


def _require_int(value, field: str, minimum: int = 0) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=field)
    if value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=field)


def resolve_exponent(value, n: int) -> str:
    """'n/2', 'n', '2n/(n-2)' style exponents resolved for dimension n."""
    if isinstance(value, str):
        text = value.strip()
        table = {"n/2": f"{n}/2", "n": f"{n}", "n/(n-2)": f"{n}/{n - 2}",
                 "2n/(n-2)": f"{2 * n}/{n - 2}"}
        return table.get(text, text)
    return str(value)


def preset_names() -> List[str]:
    return list(PRESETS)
