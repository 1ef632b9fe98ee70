# cltpc/inference/logspace.py
"""Log-space reductions. -inf is a valid value everywhere (probability 0)."""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp as _logsumexp


def logsumexp(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Max-shifted log(sum(exp(a))) along axis; all -inf gives -inf."""
    if a.shape[axis] == 2:
        # binary sums (every sum of a compiled tree): one ufunc call
        return np.logaddexp(a.take(0, axis=axis), a.take(1, axis=axis))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _logsumexp(a, axis=axis)
    return np.asarray(out, dtype=a.dtype)


def max_argmax(a: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Max along axis and the first index attaining it (ties go to the lower index)."""
    idx = np.argmax(a, axis=axis)
    return np.take_along_axis(a, np.expand_dims(idx, axis), axis=axis).squeeze(axis), idx
