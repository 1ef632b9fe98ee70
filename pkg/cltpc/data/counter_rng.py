# cltpc/data/counter_rng.py
"""
Counter-based uniforms: every draw is a pure function of (seed, stream, a, b).

Used where reproducibility must survive any partitioning of rows across
workers (mask generation, conditional sampling).
"""
from __future__ import annotations

import numpy as np

MASK_STREAM = 0
SAMPLE_STREAM = 1

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finaliser; uint64 arrays wrap silently
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _key(seed: int, stream: int) -> np.ndarray:
    base = np.array([(int(seed) & _MASK64)], dtype=np.uint64)
    tag = np.array([(int(stream) + 1) & _MASK64], dtype=np.uint64)
    return _mix(base + tag * _GOLDEN)


def uniforms(seed: int, stream: int, a, b) -> np.ndarray:
    """Uniforms in [0, 1) for the broadcast pair of index arrays (a, b)."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    h = _mix(_mix(_key(seed, stream) ^ a) + b * _GOLDEN)
    return (h >> _S11).astype(np.float64) * _INV53
