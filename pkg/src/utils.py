# src/utils.py
"""
Small shared helpers: logging setup, the worker pool, block-parallel map,
JSON writing and phase timing.
"""

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from src.config import ENV_THREADS, LOG_LEVEL

logger = logging.getLogger(__name__)

# -----------------------
# Logging
# -----------------------
LOG_FORMAT = "[%(levelname)s] %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    root = logging.getLogger()
    if not any(getattr(h, "_zerostate", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._zerostate = True
        root.addHandler(handler)
    root.setLevel((level or LOG_LEVEL).upper())


# -----------------------
# Worker pool
# -----------------------
_executor: Optional[ThreadPoolExecutor] = None
_executor_workers = 0
_executor_lock = threading.Lock()


def effective_threads(requested: Optional[int] = None, configured: Optional[int] = None) -> int:
    """Flag beats ZEROSTATE_THREADS beats the config file beats cpu_count."""
    for value in (requested, ENV_THREADS, configured):
        if value:
            return max(1, int(value))
    return os.cpu_count() or 1


def get_executor(threads: Optional[int] = None) -> ThreadPoolExecutor:
    global _executor, _executor_workers
    workers = effective_threads(threads)
    with _executor_lock:
        if _executor is None or _executor_workers != workers:
            if _executor is not None:
                _executor.shutdown(wait=True)
            _executor = ThreadPoolExecutor(max_workers=workers)
            _executor_workers = workers
    return _executor


def map_row_blocks(fn: Callable[[slice], np.ndarray], n_rows: int,
                   block: int = 256, threads: Optional[int] = None) -> np.ndarray:
    """
    Evaluate `fn` on consecutive row slices and stack the results in slice
    order. Each block is computed independently, so the output does not
    depend on the worker count.
    """
    slices = [slice(i, min(i + block, n_rows)) for i in range(0, n_rows, block)]
    if not slices:
        return fn(slice(0, 0))
    if len(slices) == 1 or effective_threads(threads) == 1:
        parts = [fn(s) for s in slices]
    else:
        parts = list(get_executor(threads).map(fn, slices))
    return np.vstack(parts)


# -----------------------
# Files
# -----------------------
def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)  # "inf" / "nan" keep the file valid JSON
    return obj


def write_json(path: Path, payload: Dict) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n",
                    encoding="utf-8")
    return path


def format_point(x: Sequence[float]) -> str:
    return " ".join(repr(float(c)) for c in x)


# -----------------------
# Timing
# -----------------------
@contextmanager
def timed(label: str, sink: Dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        sink[label] = sink.get(label, 0.0) + elapsed
        logger.info("%s finished in %.2fs", label, elapsed)


def multi_index_label(alpha: Sequence[int]) -> str:
    return "M_" + "".join(str(a) for a in alpha)
