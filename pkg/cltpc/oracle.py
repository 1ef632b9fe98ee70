# cltpc/oracle.py
"""
Brute-force reference answers by enumerating all 2^V assignments.

Nothing here calls the query engine or the tree message passing; models are
evaluated straight from their definition.
"""
from __future__ import annotations

from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .config import ORACLE_MAX_VARS
from .data.bitmatrix import CellState
from .errors import DimensionMismatch, TooManyVariables
from .models.circuit import Circuit, LeafNode, ProductNode
from .models.clt import Clt

Model = Union[Clt, Circuit]


def all_assignments(var_count: int) -> np.ndarray:
    """(2^V, V) uint8; row k is k in binary with variable 0 as the most significant bit."""
    if var_count > ORACLE_MAX_VARS:
        raise TooManyVariables(var_count, ORACLE_MAX_VARS)
    k = np.arange(1 << var_count, dtype=np.int64)[:, None]
    shifts = np.arange(var_count - 1, -1, -1, dtype=np.int64)[None, :]
    return ((k >> shifts) & 1).astype(np.uint8)


def _clt_table(model: Clt, A: np.ndarray) -> np.ndarray:
    out = np.zeros(A.shape[0])
    for i in range(model.var_count):
        p = model.parent[i]
        if p < 0:
            out += model.log_factors[i, 0][A[:, i]]
        else:
            out += model.log_factors[i][A[:, p], A[:, i]]
    return out


def _circuit_table(c: Circuit, A: np.ndarray) -> np.ndarray:
    memo = {}

    def value(k: int) -> np.ndarray:
        if k not in memo:
            node = c.nodes[k]
            if isinstance(node, LeafNode):
                memo[k] = node.log_p[A[:, node.var]]
            elif isinstance(node, ProductNode):
                memo[k] = sum(value(ch) for ch in node.children)
            else:
                terms = [w + value(ch) for w, ch in zip(node.log_weights, node.children)]
                memo[k] = np.logaddexp.reduce(np.stack(terms), axis=0)
        return memo[k]

    return np.asarray(value(c.root), dtype=np.float64)


def brute_evi_table(model: Model) -> np.ndarray:
    """log P(x) for every assignment, in all_assignments order."""
    A = all_assignments(model.var_count)
    if isinstance(model, Clt):
        return _clt_table(model, A)
    with np.errstate(divide="ignore"):
        return _circuit_table(model, A)


def _consistent(model: Model, mask_row: Sequence[int]) -> np.ndarray:
    row = np.asarray(mask_row, dtype=np.int64)
    if row.shape != (model.var_count,):
        raise DimensionMismatch(model.var_count, row.size)
    A = all_assignments(model.var_count)
    observed = row != CellState.MARG
    return (A[:, observed] == row[observed][None, :]).all(axis=1)


def brute_mar(model: Model, mask_row: Sequence[int], table: np.ndarray | None = None) -> float:
    table = brute_evi_table(model) if table is None else table
    with np.errstate(divide="ignore"):
        return float(logsumexp(table[_consistent(model, mask_row)]))


def brute_mpe(model: Model, mask_row: Sequence[int],
              table: np.ndarray | None = None) -> Tuple[np.ndarray, float]:
    """Most probable consistent completion; ties go to the lexicographically smallest."""
    table = brute_evi_table(model) if table is None else table
    ok = _consistent(model, mask_row)
    idx = np.flatnonzero(ok)
    best = idx[int(np.argmax(table[ok]))]
    return all_assignments(model.var_count)[best], float(table[best])
