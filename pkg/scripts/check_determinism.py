# scripts/check_determinism.py
"""
Run each preset's classify twice (once single-threaded, once with four
threads) and compare the SHA-256 of every CSV and report.json.

    python scripts/check_determinism.py [preset ...]
"""

import hashlib
import subprocess
import sys
import tempfile
from pathlib import Path

PRESETS = ["radial3", "dipole3", "breathing3", "radial4", "radial5"]
COMPARED = ("*.csv", "report.json")


def digests(folder: Path) -> dict:
    out = {}
    for pattern in COMPARED:
        for path in sorted(folder.glob(pattern)):
            out[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def run(preset: str, out: Path, threads: int) -> None:
    cmd = f"python -m src.cli classify --preset {preset} --out {out} --threads {threads}"
    print(">>>", cmd)
    subprocess.run(cmd, shell=True, check=True)


presets = sys.argv[1:] or PRESETS
failures = []
with tempfile.TemporaryDirectory() as tmp:
    for preset in presets:
        a = Path(tmp) / preset / "a"
        b = Path(tmp) / preset / "b"
        run(preset, a, 1)
        run(preset, b, 4)
        da, db = digests(a), digests(b)
        for name in sorted(set(da) | set(db)):
            same = da.get(name) == db.get(name)
            print(f"  {preset}/{name}: {'same' if same else 'DIFFERENT'}")
            if not same:
                failures.append(f"{preset}/{name}")

if failures:
    raise SystemExit(f"[FAIL] non-deterministic outputs: {', '.join(failures)}")
print("\n[OK] Outputs are bitwise identical.")
