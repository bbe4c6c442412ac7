# src/config.py
from pathlib import Path
from dotenv import load_dotenv
import os

load_dotenv()  # loads .env into env

ROOT = Path(__file__).resolve().parents[1]  # project root
OUTPUT_DIR = Path(os.getenv("ZEROSTATE_OUTPUT_DIR") or ROOT / "outputs")

# Worker threads for kernel assembly (0 / unset -> decided by the CLI)
ENV_THREADS = int(os.getenv("ZEROSTATE_THREADS", "0") or 0)
LOG_LEVEL = os.getenv("ZEROSTATE_LOG_LEVEL", "INFO").upper()

# Report format version, bumped whenever a report field changes meaning
SCHEMA_VERSION = "1.0"

# Other constants
DEFAULT_SEED = 20240229
DEFAULT_CONTRACTION_TARGET = 0.4
MAX_CONTRACTION = 0.5
