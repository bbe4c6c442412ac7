# scripts/run_all.py
"""
Run every preset through classify, norms, verify and expand.

    python scripts/run_all.py            # all presets
    python scripts/run_all.py radial3    # just one

Expected exit codes: `empty` ends with 5 (no zero state); everything else 0.
"""

import subprocess
import sys

PRESETS = ["radial3", "dipole3", "breathing3", "radial4", "radial5", "empty"]
EXPECTED = {("empty", "classify"): 5}


def run(cmd, expected=0):
    print("\n>>>", cmd)
    code = subprocess.run(cmd, shell=True).returncode
    if code != expected:
        raise SystemExit(f"[FAIL] exit {code} (expected {expected}): {cmd}")


presets = sys.argv[1:] or PRESETS
for preset in presets:
    print(f"\n=== {preset} ===")
    for command in ("classify", "norms", "expand"):
        run(f"python -m src.cli {command} --preset {preset} --plot"
            if command == "classify" else f"python -m src.cli {command} --preset {preset}",
            EXPECTED.get((preset, command), 0))

run("python -m src.cli verify --preset radial3")

print("\n[OK] All presets completed.")
