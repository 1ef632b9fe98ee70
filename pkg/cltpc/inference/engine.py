# cltpc/inference/engine.py
"""
Batch query engine over circuits.

Rows are split into fixed blocks (see parallel.py); each block is evaluated
by one forward scan of the arena with one EvalBuffer row-vector per node.
Top-down passes (MPE trace, conditional sampling) scan the arena backwards,
which visits every parent before its children.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..config import BLOCK_ROWS, DEFAULT_PRECISION, resolve_dtype
from ..data.bitmatrix import BitMatrix, CellState, MaskedBatch, require_cols
from ..data.counter_rng import SAMPLE_STREAM, uniforms
from ..errors import ZeroEvidenceProbability
from ..models.circuit import Circuit, LeafNode, ProductNode, SumNode
from ..models.clt import MpeResult
from .logspace import logsumexp, max_argmax
from .parallel import map_blocks

logger = logging.getLogger(__name__)


class QueryKind(Enum):
    EVI = "evi"
    MAR = "mar"
    MPE = "mpe"
    CONDITIONAL_SAMPLE = "sample"


@dataclass
class EvalBuffer:
    """Per-worker scratch: one log-value row per arena node, plus argmax slots."""
    values: np.ndarray              # (nodes, rows)
    choice: np.ndarray | None = None  # (nodes, rows) child position / leaf value

    @staticmethod
    def allocate(n_nodes: int, rows: int, dtype, with_choice: bool = False) -> "EvalBuffer":
        return EvalBuffer(
            values=np.empty((n_nodes, rows), dtype=dtype),
            choice=np.zeros((n_nodes, rows), dtype=np.int32) if with_choice else None,
        )


class _Plan:
    """Circuit parameters cast once to the query precision."""

    def __init__(self, c: Circuit, dtype):
        self.circuit = c
        self.dtype = dtype
        self.params: List[np.ndarray | None] = []
        self.children: List[np.ndarray | None] = []
        for node in c.nodes:
            if isinstance(node, LeafNode):
                self.params.append(node.log_p.astype(dtype))
                self.children.append(None)
            elif isinstance(node, SumNode):
                self.params.append(node.log_weights.astype(dtype)[:, None])
                self.children.append(np.asarray(node.children, dtype=np.int64))
            else:
                self.params.append(None)
                self.children.append(np.asarray(node.children, dtype=np.int64))


# ---------- upward passes ----------

def _upward_sum(plan: _Plan, cells: np.ndarray, buf: EvalBuffer) -> None:
    """Sum-product pass; Marg leaves evaluate to log 1. EVI is the no-Marg case."""
    vals = buf.values
    for k, node in enumerate(plan.circuit.nodes):
        if isinstance(node, LeafNode):
            col = cells[:, node.var]
            lp = plan.params[k]
            vals[k] = np.where(col == CellState.MARG, 0, lp[np.minimum(col, 1)])
        elif isinstance(node, ProductNode):
            vals[k] = vals[plan.children[k]].sum(axis=0)
        else:
            vals[k] = logsumexp(plan.params[k] + vals[plan.children[k]], axis=0)


def _upward_max(plan: _Plan, cells: np.ndarray, buf: EvalBuffer) -> None:
    """Max-product pass recording the argmax child of every sum and leaf."""
    vals, choice = buf.values, buf.choice
    for k, node in enumerate(plan.circuit.nodes):
        if isinstance(node, LeafNode):
            col = cells[:, node.var]
            lp = plan.params[k]
            best = int(np.argmax(lp))
            marg = col == CellState.MARG
            vals[k] = np.where(marg, lp[best], lp[np.minimum(col, 1)])
            choice[k] = np.where(marg, best, col)
        elif isinstance(node, ProductNode):
            vals[k] = vals[plan.children[k]].sum(axis=0)
        else:
            vals[k], choice[k] = max_argmax(plan.params[k] + vals[plan.children[k]], axis=0)


# ---------- top-down passes ----------

def _trace_down(plan: _Plan, cells: np.ndarray, pick_child, pick_leaf) -> np.ndarray:
    """
    Walk from the root choosing one child at sums and all children at products.
    pick_child(k, active) -> child position per active row; pick_leaf(k, active) -> value.
    Observed cells are copied through.
    """
    c = plan.circuit
    rows = cells.shape[0]
    out = np.where(cells == CellState.MARG, 0, cells).astype(np.uint8)
    active = np.zeros((len(c.nodes), rows), dtype=bool)
    active[c.root] = True
    for k in range(c.root, -1, -1):
        here = active[k]
        if not here.any():
            continue
        node = c.nodes[k]
        if isinstance(node, SumNode):
            pos = np.full(rows, -1, dtype=np.int64)
            pos[here] = pick_child(k, here)
            for j, ch in enumerate(node.children):
                active[ch] |= pos == j
        elif isinstance(node, ProductNode):
            active[plan.children[k]] |= here
        else:
            fill = here & (cells[:, node.var] == CellState.MARG)
            if fill.any():
                out[fill, node.var] = pick_leaf(k, fill)
    return out


def _evi_block(plan: _Plan, x: np.ndarray) -> np.ndarray:
    buf = EvalBuffer.allocate(len(plan.circuit.nodes), x.shape[0], plan.dtype)
    _upward_sum(plan, x, buf)
    return buf.values[plan.circuit.root].copy()


# ---------- public queries ----------

def _cells_of(batch: BitMatrix) -> np.ndarray:
    return batch.to_array().astype(np.int8)


def pc_mar(c: Circuit, batch: MaskedBatch, jobs: int = 1, precision: int = DEFAULT_PRECISION,
           block_rows: int = BLOCK_ROWS) -> np.ndarray:
    """Per-row log marginal probability of the observed cells."""
    require_cols(batch.cols, c.var_count)
    plan = _Plan(c, resolve_dtype(precision))
    parts = map_blocks(lambda s, e: _evi_block(plan, batch.cells[s:e]), batch.rows, jobs, block_rows)
    logger.info("MAR over %d rows (jobs=%d)", batch.rows, jobs)
    return np.concatenate(parts)


def pc_evi(c: Circuit, batch: BitMatrix, jobs: int = 1, precision: int = DEFAULT_PRECISION,
           block_rows: int = BLOCK_ROWS) -> np.ndarray:
    """Per-row log-likelihood of complete assignments."""
    require_cols(batch.cols, c.var_count)
    return pc_mar(c, MaskedBatch(cells=_cells_of(batch)), jobs, precision, block_rows)


def pc_mpe(c: Circuit, batch: MaskedBatch, jobs: int = 1, precision: int = DEFAULT_PRECISION,
           block_rows: int = BLOCK_ROWS) -> MpeResult:
    """
    Max-product upward pass, then a top-down trace of the argmax choices.
    Exact when the circuit is deterministic; otherwise log_value is a lower bound
    of the true maximum and the result is flagged exact=False.
    """
    require_cols(batch.cols, c.var_count)
    exact = c.report.deterministic is True and c.report.valid
    if not exact:
        logger.warning("circuit is not known to be deterministic; MPE is approximate")
    plan = _Plan(c, resolve_dtype(precision))

    def run(s: int, e: int) -> Tuple[np.ndarray, np.ndarray]:
        cells = batch.cells[s:e]
        buf = EvalBuffer.allocate(len(c.nodes), e - s, plan.dtype, with_choice=True)
        _upward_max(plan, cells, buf)
        impossible = np.flatnonzero(buf.values[c.root] == -np.inf)
        if impossible.size:
            raise ZeroEvidenceProbability(impossible + s)
        x = _trace_down(plan, cells,
                        pick_child=lambda k, rows: buf.choice[k][rows],
                        pick_leaf=lambda k, rows: buf.choice[k][rows])
        return x, _evi_block(plan, x.astype(np.int8))

    parts = map_blocks(run, batch.rows, jobs, block_rows)
    logger.info("MPE over %d rows (jobs=%d)", batch.rows, jobs)
    return MpeResult(completion=np.concatenate([p[0] for p in parts]),
                     log_value=np.concatenate([p[1] for p in parts]), exact=exact)


@dataclass(frozen=True)
class SampleResult:
    completions: BitMatrix
    log_value: np.ndarray


def pc_conditional_sample(c: Circuit, batch: MaskedBatch, seed: int, jobs: int = 1,
                          precision: int = DEFAULT_PRECISION,
                          block_rows: int = BLOCK_ROWS) -> SampleResult:
    """
    Exact samples from P(Marg cells | observed cells): an upward MAR pass, then
    a top-down pass picking sum children in proportion to weight * child value.
    Randomness of row r at node k is a pure function of (seed, r, k).
    """
    require_cols(batch.cols, c.var_count)
    plan = _Plan(c, resolve_dtype(precision))

    def run(s: int, e: int) -> Tuple[np.ndarray, np.ndarray]:
        cells = batch.cells[s:e]
        buf = EvalBuffer.allocate(len(c.nodes), e - s, plan.dtype)
        _upward_sum(plan, cells, buf)
        vals = buf.values
        impossible = np.flatnonzero(vals[c.root] == -np.inf)
        if impossible.size:
            raise ZeroEvidenceProbability(impossible + s)
        row_ids = np.arange(s, e, dtype=np.uint64)

        def pick_child(k: int, rows: np.ndarray) -> np.ndarray:
            node_ids = plan.children[k]
            logits = plan.params[k] + vals[node_ids][:, rows] - vals[k][rows]
            cum = np.cumsum(np.exp(logits.astype(np.float64)), axis=0)
            u = uniforms(seed, SAMPLE_STREAM, row_ids[rows], k) * cum[-1]
            return np.minimum((u[None, :] >= cum).sum(axis=0), len(node_ids) - 1)

        def pick_leaf(k: int, rows: np.ndarray) -> np.ndarray:
            p_one = np.exp(float(plan.params[k][1]))
            return (uniforms(seed, SAMPLE_STREAM, row_ids[rows], k) < p_one).astype(np.uint8)

        x = _trace_down(plan, cells, pick_child, pick_leaf)
        return x, _evi_block(plan, x.astype(np.int8))

    parts = map_blocks(run, batch.rows, jobs, block_rows)
    logger.info("conditional sampling over %d rows (jobs=%d)", batch.rows, jobs)
    return SampleResult(completions=BitMatrix.from_array(np.concatenate([p[0] for p in parts])),
                        log_value=np.concatenate([p[1] for p in parts]))


def pc_sample(c: Circuit, n: int, seed: int, jobs: int = 1,
              precision: int = DEFAULT_PRECISION) -> BitMatrix:
    """Unconditional samples: conditional sampling with every cell marginalized."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cells = np.full((n, c.var_count), CellState.MARG, dtype=np.int8)
    return pc_conditional_sample(c, MaskedBatch(cells=cells), seed, jobs, precision).completions
