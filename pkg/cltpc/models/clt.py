# cltpc/models/clt.py
"""
Binary Chow-Liu trees: structure and parameter learning, exact EVI / MAR / MPE
by message passing on the tree, and ancestral sampling.

log_factors[i, s, v] = log P(x_i = v | x_parent(i) = s). The root has no
parent; both of its rows hold the prior log P(x_root = v).
"""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..config import BLOCK_ROWS, DEFAULT_ALPHA, DEFAULT_PRECISION, DEFAULT_ROOT, resolve_dtype
from ..data.bitmatrix import BitMatrix, CellState, MaskedBatch, PairCounts, pairwise_counts, require_cols
from ..errors import DegenerateTable, ModelError, ZeroEvidenceProbability
from ..inference.parallel import map_blocks
from ..io.documents import decode_floats, encode_floats, read_document, write_document

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9


@dataclass(frozen=True)
class SmoothingSpec:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class MpeResult:
    completion: np.ndarray  # (N, V) uint8, agrees with every observed cell
    log_value: np.ndarray   # (N,) log-likelihood of the completion
    exact: bool = True


@dataclass(frozen=True)
class Clt:
    var_count: int
    root: int
    parent: np.ndarray       # (V,) int64, -1 at the root
    topo_order: np.ndarray   # (V,) root first, parents before children
    log_factors: np.ndarray  # (V, 2, 2) float64

    def __post_init__(self):
        v = self.var_count
        if v < 1:
            raise ModelError("a Clt needs at least one variable")
        if self.parent.shape != (v,) or self.topo_order.shape != (v,):
            raise ModelError("parent and topo_order must have one entry per variable")
        if self.log_factors.shape != (v, 2, 2):
            raise ModelError(f"log_factors must have shape ({v}, 2, 2)")
        roots = np.flatnonzero(self.parent < 0)
        if roots.tolist() != [self.root]:
            raise ModelError(f"exactly one parentless variable expected (the root {self.root}), "
                             f"found {roots.tolist()}")
        if sorted(self.topo_order.tolist()) != list(range(v)) or self.topo_order[0] != self.root:
            raise ModelError("topo_order must list every variable once, root first")
        pos = np.empty(v, dtype=np.int64)
        pos[self.topo_order] = np.arange(v)
        for i in range(v):
            p = self.parent[i]
            if p >= 0 and (p >= v or pos[p] >= pos[i]):
                raise ModelError(f"variable {i}: parent {p} does not precede it (cycle or bad index)")
        with np.errstate(invalid="ignore"):
            totals = np.logaddexp(self.log_factors[..., 0], self.log_factors[..., 1])
        bad = np.argwhere(~(np.abs(totals) <= NORM_TOL))
        if bad.size:
            i, s = bad[0]
            raise ModelError(f"variable {i}: conditional column for parent state {s} "
                             f"does not normalize (log total {totals[i, s]:.3g})")
        if not np.array_equal(self.log_factors[self.root, 0], self.log_factors[self.root, 1]):
            raise ModelError("both rows of the root table must hold the prior")

    # ---------- construction ----------
    @staticmethod
    def build(parent: Sequence[int], log_factors, root: int | None = None) -> "Clt":
        """Clt from a parent list (-1 or None at the root); topo_order is a BFS from the root."""
        par = np.array([-1 if p is None else int(p) for p in parent], dtype=np.int64)
        if root is None:
            roots = np.flatnonzero(par < 0)
            root = int(roots[0]) if roots.size else 0
        kids: List[List[int]] = [[] for _ in range(len(par))]
        for i, p in enumerate(par):
            if p >= 0 and p < len(par):
                kids[p].append(i)
        order = _bfs(kids, root, len(par))
        return Clt(var_count=len(par), root=int(root), parent=par,
                   topo_order=np.array(order, dtype=np.int64),
                   log_factors=np.array(log_factors, dtype=np.float64))

    # ---------- structure helpers ----------
    @property
    def root_prior(self) -> np.ndarray:
        return self.log_factors[self.root, 0].copy()

    def children(self) -> List[List[int]]:
        kids: List[List[int]] = [[] for _ in range(self.var_count)]
        for i in self.topo_order[1:]:
            kids[self.parent[i]].append(int(i))
        return kids

    def edges(self) -> List[Tuple[int, int]]:
        """Undirected edges as sorted (low, high) pairs, sorted."""
        return sorted((min(int(p), i), max(int(p), i)) for i, p in enumerate(self.parent) if p >= 0)

    def internal_count(self) -> int:
        return sum(1 for k in self.children() if k)

    def _parent_index(self) -> np.ndarray:
        # the root reads its own value as "parent state"; both root rows are equal
        idx = self.parent.copy()
        idx[self.root] = self.root
        return idx

    # ---------- documents ----------
    def to_document(self) -> Dict[str, object]:
        factors = []
        for i in range(self.var_count):
            if i == self.root:
                factors.append(encode_floats(self.log_factors[i, 0]))
            else:
                factors.append([encode_floats(self.log_factors[i, s]) for s in (0, 1)])
        return {
            "var_count": self.var_count,
            "root": self.root,
            "parents": [None if p < 0 else int(p) for p in self.parent],
            "log_factors": factors,
        }

    @staticmethod
    def from_document(meta: Dict[str, object]) -> "Clt":
        try:
            v = int(meta["var_count"])
            root = int(meta["root"])
            parents = list(meta["parents"])
            raw = list(meta["log_factors"])
        except (KeyError, TypeError, ValueError) as e:
            raise ModelError(f"Clt document is incomplete: {e}")
        if len(parents) != v or len(raw) != v:
            raise ModelError("Clt document: parents/log_factors length differs from var_count")
        lf = np.empty((v, 2, 2), dtype=np.float64)
        for i, entry in enumerate(raw):
            try:
                if i == root:
                    lf[i, 0] = lf[i, 1] = decode_floats(entry)
                else:
                    lf[i] = [decode_floats(entry[0]), decode_floats(entry[1])]
            except (IndexError, TypeError, ValueError) as e:
                raise ModelError(f"Clt document: log_factors[{i}] is not a valid table: {e}")
        return Clt.build(parents, lf, root=root)


def save_clt(path: str, model: Clt) -> None:
    write_document(path, "clt", model.to_document())


def load_clt(path: str) -> Clt:
    return Clt.from_document(read_document(path, "clt"))


def _bfs(kids: List[List[int]], root: int, v: int) -> List[int]:
    order, seen = [], [False] * v
    queue = deque([root])
    seen[root] = True
    while queue:
        i = queue.popleft()
        order.append(i)
        for c in sorted(kids[i]):
            if not seen[c]:
                seen[c] = True
                queue.append(c)
    return order


# ---------- learning ----------

def _as_smoothing(alpha) -> SmoothingSpec:
    return alpha if isinstance(alpha, SmoothingSpec) else SmoothingSpec(float(alpha))


def mutual_information(counts: PairCounts, alpha: SmoothingSpec | float = DEFAULT_ALPHA,
                       chunk: int = 256) -> np.ndarray:
    """V x V mutual information (nats) of the smoothed pairwise joints."""
    a = _as_smoothing(alpha).alpha
    v = counts.joint.shape[0]
    mi = np.empty((v, v), dtype=np.float64)
    for start in range(0, v, chunk):
        joint = (counts.joint[start:start + chunk].astype(np.float64) + a) / (counts.n + 4.0 * a)
        # marginals from the smoothed joint itself, so MI >= 0
        p_i = joint.sum(axis=3, keepdims=True)
        p_j = joint.sum(axis=2, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = joint * np.log(joint / (p_i * p_j))
        terms[joint == 0] = 0.0
        mi[start:start + chunk] = terms.sum(axis=(2, 3))
    return (mi + mi.T) / 2.0


def _prim_max_spanning(mi: np.ndarray) -> List[Tuple[int, int]]:
    """
    Maximum spanning tree of a dense weight matrix, grown from vertex 0.
    Among equal-weight candidate edges (tree vertex, new vertex) the
    lexicographically smallest pair wins.
    """
    v = mi.shape[0]
    in_tree = np.zeros(v, dtype=bool)
    in_tree[0] = True
    best = mi[0].copy()
    best_from = np.zeros(v, dtype=np.int64)
    edges = []
    for _ in range(v - 1):
        cand = np.where(in_tree, -np.inf, best)
        ties = np.flatnonzero(cand == cand.max())
        j = int(ties[np.lexsort((ties, best_from[ties]))[0]])
        edges.append((int(best_from[j]), j))
        in_tree[j] = True
        # on equal weight keep the smaller tree vertex
        better = ((mi[j] > best) | ((mi[j] == best) & (j < best_from))) & ~in_tree
        best[better] = mi[j][better]
        best_from[better] = j
    return edges


def fit_clt(data: BitMatrix, alpha: SmoothingSpec | float = DEFAULT_ALPHA,
            root: int | None = None, jobs: int = 1) -> Clt:
    alpha = _as_smoothing(alpha)
    root = DEFAULT_ROOT if root is None else int(root)
    v, n = data.cols, data.rows
    if not 0 <= root < v:
        raise ModelError(f"root {root} is not a variable index (V={v})")

    t0 = time.perf_counter()
    counts = pairwise_counts(data, jobs=jobs)
    mi = mutual_information(counts, alpha)
    edges = _prim_max_spanning(mi)
    logger.debug("spanning tree: %d edges, total MI %.6f nats",
                 len(edges), sum(mi[a, b] for a, b in edges))

    kids: List[List[int]] = [[] for _ in range(v)]
    for a, b in edges:
        kids[a].append(b)
        kids[b].append(a)
    order = _bfs(kids, root, v)
    parent = np.full(v, -1, dtype=np.int64)
    seen = np.zeros(v, dtype=bool)
    for i in order:
        seen[i] = True
        for c in kids[i]:
            if not seen[c]:
                parent[c] = i

    a = alpha.alpha
    lf = np.empty((v, 2, 2), dtype=np.float64)
    ones = np.diagonal(counts.joint[:, :, 1, 1]).astype(np.float64)
    with np.errstate(divide="ignore"):
        prior = np.log(np.stack([n - ones, ones], axis=1) + a) - np.log(n + 2.0 * a)
    for i in range(v):
        p = parent[i]
        if p < 0:
            lf[i, 0] = lf[i, 1] = prior[i]
            continue
        n_vs = counts.joint[i, p].astype(np.float64)  # [v, s]
        n_s = n_vs.sum(axis=0)
        for s in (0, 1):
            if n_s[s] + 2.0 * a == 0.0:
                raise DegenerateTable(i, int(p), s)
            with np.errstate(divide="ignore"):
                lf[i, s] = np.log(n_vs[:, s] + a) - np.log(n_s[s] + 2.0 * a)

    model = Clt(var_count=v, root=root, parent=parent,
                topo_order=np.array(order, dtype=np.int64), log_factors=lf)
    logger.info("fitted Chow-Liu tree: V=%d root=%d alpha=%g in %.3fs",
                v, root, a, time.perf_counter() - t0)
    return model


# ---------- queries ----------

def _evi_rows(model: Clt, lf: np.ndarray, x: np.ndarray) -> np.ndarray:
    cols = np.arange(model.var_count)
    return lf[cols[None, :], x[:, model._parent_index()], x].sum(axis=1)


def _allowed(cells: np.ndarray) -> np.ndarray:
    # (B, 2): value v is admissible for the cell
    marg = (cells == CellState.MARG)[:, None]
    return marg | (cells[:, None] == np.array([0, 1], dtype=cells.dtype)[None, :])


def clt_evi(model: Clt, batch: BitMatrix, jobs: int = 1, precision: int = DEFAULT_PRECISION,
            block_rows: int = BLOCK_ROWS) -> np.ndarray:
    require_cols(batch.cols, model.var_count)
    lf = model.log_factors.astype(resolve_dtype(precision))
    X = batch.to_array()
    parts = map_blocks(lambda s, e: _evi_rows(model, lf, X[s:e]), batch.rows, jobs, block_rows)
    logger.info("tree EVI over %d rows (jobs=%d)", batch.rows, jobs)
    return np.concatenate(parts)


def clt_mar(model: Clt, batch: MaskedBatch, jobs: int = 1, precision: int = DEFAULT_PRECISION,
            block_rows: int = BLOCK_ROWS) -> np.ndarray:
    require_cols(batch.cols, model.var_count)
    dtype = resolve_dtype(precision)
    lf = model.log_factors.astype(dtype)
    neg_inf = dtype(-np.inf)

    def run(s: int, e: int) -> np.ndarray:
        cells = batch.cells[s:e]
        acc = np.zeros((model.var_count, e - s, 2), dtype=dtype)  # sum of child messages per value
        out = None
        for i in model.topo_order[::-1]:
            scores = lf[i][None, :, :] + acc[i][:, None, :]  # (B, s, v)
            scores = np.where(_allowed(cells[:, i])[:, None, :], scores, neg_inf)
            msg = np.logaddexp(scores[..., 0], scores[..., 1])  # (B, s)
            if i == model.root:
                out = msg[:, 0]
            else:
                acc[model.parent[i]] += msg
        return out

    out = np.concatenate(map_blocks(run, batch.rows, jobs, block_rows))
    logger.info("tree MAR over %d rows (jobs=%d)", batch.rows, jobs)
    return out


def clt_mpe(model: Clt, batch: MaskedBatch, jobs: int = 1, precision: int = DEFAULT_PRECISION,
            block_rows: int = BLOCK_ROWS) -> MpeResult:
    require_cols(batch.cols, model.var_count)
    dtype = resolve_dtype(precision)
    lf = model.log_factors.astype(dtype)
    neg_inf = dtype(-np.inf)

    def run(s: int, e: int):
        cells = batch.cells[s:e]
        b = e - s
        acc = np.zeros((model.var_count, b, 2), dtype=dtype)
        arg = np.zeros((model.var_count, b, 2), dtype=np.uint8)  # best value per parent state
        for i in model.topo_order[::-1]:
            scores = lf[i][None, :, :] + acc[i][:, None, :]
            scores = np.where(_allowed(cells[:, i])[:, None, :], scores, neg_inf)
            best = np.argmax(scores, axis=2)  # ties -> value 0
            observed = cells[:, i] != CellState.MARG
            best[observed] = cells[observed, i][:, None]
            arg[i] = best
            if i != model.root:
                acc[model.parent[i]] += np.take_along_axis(scores, best[..., None], axis=2)[..., 0]

        x = np.zeros((b, model.var_count), dtype=np.uint8)
        rows = np.arange(b)
        for i in model.topo_order:
            if i == model.root:
                x[:, i] = arg[i][:, 0]
            else:
                x[:, i] = arg[i][rows, x[:, model.parent[i]]]
        values = _evi_rows(model, lf, x)
        impossible = np.flatnonzero(values == -np.inf)
        if impossible.size:
            raise ZeroEvidenceProbability(impossible + s)
        return x, values

    parts = map_blocks(run, batch.rows, jobs, block_rows)
    logger.info("tree MPE over %d rows (jobs=%d)", batch.rows, jobs)
    return MpeResult(completion=np.concatenate([p[0] for p in parts]),
                     log_value=np.concatenate([p[1] for p in parts]), exact=True)


def clt_sample(model: Clt, n: int, seed: int) -> BitMatrix:
    """Ancestral sampling: root from its prior, then each child given its parent."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x = np.zeros((n, model.var_count), dtype=np.uint8)
    pa = model._parent_index()
    for i in model.topo_order:
        p_one = np.exp(model.log_factors[i, x[:, pa[i]], 1])
        x[:, i] = rng.random(n) < p_one
    return BitMatrix.from_array(x)
