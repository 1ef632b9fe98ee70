# cltpc/config.py
from __future__ import annotations

import numpy as np

APP_VERSION = "0.1.0"
FORMAT_VERSION = 1  # Clt and Circuit documents

# Learning
DEFAULT_ALPHA = 0.01
DEFAULT_ROOT = 0

# Queries / benchmark protocol
DEFAULT_RUNS = 10
DEFAULT_JOBS = 1
DEFAULT_MASK_P = 0.5
DEFAULT_SEED = 1337
DEFAULT_PRECISION = 64
BLOCK_ROWS = 2048  # rows per work unit; never depends on jobs

ORACLE_MAX_VARS = 20

# name -> (N, V) of the training splits used by the benchmark
BENCH_DATASETS: dict[str, tuple[int, int]] = {
    "msweb": (29441, 294),
    "bmnist": (50000, 784),
    "ad": (2461, 1556),
}

# name -> reference mean train log-likelihood (EVI, MAR, MPE) of a Chow-Liu tree
REFERENCE_LL: dict[str, tuple[float, float, float]] = {
    "msweb": (-10.10, -5.30, -6.72),
    "bmnist": (-135.85, -78.92, -106.56),
    "ad": (-15.48, -10.97, -12.19),
}


def resolve_dtype(precision: int) -> type[np.floating]:
    """32 -> float32, 64 -> float64."""
    if precision == 32:
        return np.float32
    if precision == 64:
        return np.float64
    raise ValueError(f"precision must be 32 or 64, got {precision!r}")
