# cltpc/models/circuit.py
"""
Probabilistic circuits stored as an arena: a node's children always have
smaller indices than the node itself, so a forward scan is a valid
evaluation order and cycles cannot be expressed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DanglingChild, EmptySum, InvariantViolation, ModelError, UnnormalizedSum
from ..io.documents import decode_floats, encode_floats, read_document, write_document

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SumNode:
    children: Tuple[int, ...]
    log_weights: np.ndarray


@dataclass(frozen=True)
class ProductNode:
    children: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LeafNode:
    """Bernoulli leaf over one variable; log_p[v] = log P(x_var = v)."""
    var: int
    log_p: np.ndarray

    @property
    def indicator_value(self) -> Optional[int]:
        """v when the leaf puts all mass on x_var = v, else None."""
        if self.log_p[0] == 0.0 and self.log_p[1] == -np.inf:
            return 0
        if self.log_p[1] == 0.0 and self.log_p[0] == -np.inf:
            return 1
        return None


Node = Union[SumNode, ProductNode, LeafNode]


def sum_node(children: Sequence[int], log_weights) -> SumNode:
    return SumNode(children=tuple(int(c) for c in children),
                   log_weights=np.asarray(log_weights, dtype=np.float64))


def product_node(children: Sequence[int]) -> ProductNode:
    return ProductNode(children=tuple(int(c) for c in children))


def leaf_node(var: int, log_p) -> LeafNode:
    return LeafNode(var=int(var), log_p=np.asarray(log_p, dtype=np.float64))


def indicator_leaf(var: int, value: int) -> LeafNode:
    log_p = np.full(2, -np.inf)
    log_p[value] = 0.0
    return LeafNode(var=int(var), log_p=log_p)


def _log_total(log_values: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(np.logaddexp.reduce(log_values))


def check_arena(var_count: int, nodes: Sequence[Node], root: int) -> None:
    """Raise on the first local invariant violation of the arena."""
    if not nodes:
        raise ModelError("circuit arena is empty")
    if not 0 <= root < len(nodes):
        raise InvariantViolation(root, f"root is outside the arena of {len(nodes)} nodes")
    for k, node in enumerate(nodes):
        if isinstance(node, LeafNode):
            if not 0 <= node.var < var_count:
                raise InvariantViolation(k, f"leaf variable {node.var} outside 0..{var_count - 1}")
            if node.log_p.shape != (2,) or not abs(_log_total(node.log_p)) <= NORM_TOL:
                raise InvariantViolation(k, "Bernoulli leaf does not normalize")
            continue
        for c in node.children:
            if not 0 <= c < k:
                raise DanglingChild(k, c)
        if isinstance(node, SumNode):
            if not node.children:
                raise EmptySum(k)
            if node.log_weights.shape != (len(node.children),):
                raise InvariantViolation(k, "one log-weight per child expected")
            total = _log_total(node.log_weights)
            if not abs(total) <= NORM_TOL:
                raise UnnormalizedSum(k, total)
        elif isinstance(node, ProductNode):
            if len(node.children) < 2:
                raise InvariantViolation(k, "product unit needs at least 2 children")
        else:
            raise InvariantViolation(k, f"unknown node type {type(node).__name__}")


@dataclass(frozen=True, eq=False)
class Circuit:
    var_count: int
    nodes: Tuple[Node, ...]
    root: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        check_arena(self.var_count, self.nodes, self.root)

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def scopes(self) -> List[FrozenSet[int]]:
        return scope_of(self)

    @cached_property
    def report(self) -> "StructureReport":
        return validate(self)

    def counts(self) -> Tuple[int, int, int]:
        """(sums, products, leaves)."""
        sums = sum(isinstance(n, SumNode) for n in self.nodes)
        products = sum(isinstance(n, ProductNode) for n in self.nodes)
        return sums, products, len(self.nodes) - sums - products

    @property
    def is_indicator(self) -> bool:
        return all(n.indicator_value is not None for n in self.nodes if isinstance(n, LeafNode))


# ---------- structure ----------

def scope_of(c: Circuit) -> List[FrozenSet[int]]:
    scopes: List[FrozenSet[int]] = []
    for node in c.nodes:
        if isinstance(node, LeafNode):
            scopes.append(frozenset((node.var,)))
        else:
            scopes.append(frozenset().union(*(scopes[ch] for ch in node.children)))
    return scopes


@dataclass(frozen=True)
class StructureReport:
    smooth: bool
    decomposable: bool
    deterministic: Optional[bool]  # None: unknown (non-indicator leaves present)
    sums: int
    products: int
    leaves: int
    violations: Tuple[Tuple[str, int], ...] = field(default=())

    @property
    def valid(self) -> bool:
        """Smooth and decomposable: MAR by leaf substitution is exact."""
        return self.smooth and self.decomposable


def _forced_assignments(c: Circuit) -> List[Dict[int, int]]:
    # variable values every member of a node's support agrees on (indicator circuits)
    forced: List[Dict[int, int]] = []
    for node in c.nodes:
        if isinstance(node, LeafNode):
            v = node.indicator_value
            forced.append({} if v is None else {node.var: v})
        elif isinstance(node, ProductNode):
            merged: Dict[int, int] = {}
            for ch in node.children:
                merged.update(forced[ch])
            forced.append(merged)
        else:
            first, *rest = (forced[ch] for ch in node.children)
            forced.append({k: v for k, v in first.items() if all(r.get(k) == v for r in rest)})
    return forced


def _disjoint(a: Dict[int, int], b: Dict[int, int]) -> bool:
    return any(b.get(k, v) != v for k, v in a.items())


def validate(c: Circuit) -> StructureReport:
    check_arena(c.var_count, c.nodes, c.root)
    scopes = c.scopes
    violations: List[Tuple[str, int]] = []

    for k, node in enumerate(c.nodes):
        if isinstance(node, SumNode):
            first = scopes[node.children[0]]
            if any(scopes[ch] != first for ch in node.children[1:]):
                violations.append(("smooth", k))
        elif isinstance(node, ProductNode):
            if sum(len(scopes[ch]) for ch in node.children) != len(scopes[k]):
                violations.append(("decomposable", k))

    deterministic: Optional[bool] = None
    if c.is_indicator:
        forced = _forced_assignments(c)
        deterministic = True
        for k, node in enumerate(c.nodes):
            if isinstance(node, SumNode) and not all(
                _disjoint(forced[a], forced[b]) for a, b in combinations(node.children, 2)
            ):
                violations.append(("deterministic", k))
                deterministic = False

    sums, products, leaves = c.counts()
    return StructureReport(
        smooth=not any(p == "smooth" for p, _ in violations),
        decomposable=not any(p == "decomposable" for p, _ in violations),
        deterministic=deterministic,
        sums=sums, products=products, leaves=leaves,
        violations=tuple(violations),
    )


# ---------- documents ----------

def _node_document(node: Node) -> Dict[str, object]:
    if isinstance(node, SumNode):
        return {"kind": "sum", "children": list(node.children),
                "log_weights": encode_floats(node.log_weights)}
    if isinstance(node, ProductNode):
        return {"kind": "product", "children": list(node.children)}
    return {"kind": "leaf", "var": node.var, "log_p": encode_floats(node.log_p)}


def _node_from_document(k: int, item: Dict[str, object]) -> Node:
    try:
        kind = item["kind"]
        if kind == "sum":
            return sum_node(item["children"], decode_floats(item["log_weights"]))
        if kind == "product":
            return product_node(item["children"])
        if kind == "leaf":
            return leaf_node(item["var"], decode_floats(item["log_p"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InvariantViolation(k, f"incomplete node entry: {e}")
    raise InvariantViolation(k, f"unknown node kind {kind!r}")


def _check_root_scope(c: Circuit) -> None:
    if c.scopes[c.root] != frozenset(range(c.var_count)):
        raise InvariantViolation(c.root, "root scope does not cover every variable")


def circuit_to_document(c: Circuit) -> Dict[str, object]:
    return {"var_count": c.var_count, "root": c.root,
            "nodes": [_node_document(n) for n in c.nodes]}


def circuit_from_document(meta: Dict[str, object]) -> Circuit:
    try:
        var_count = int(meta["var_count"])
        root = int(meta["root"])
        items = list(meta["nodes"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"circuit document is incomplete: {e}")
    c = Circuit(var_count=var_count,
                nodes=tuple(_node_from_document(k, it) for k, it in enumerate(items)),
                root=root)
    _check_root_scope(c)
    return c


def save_circuit(path: str, c: Circuit) -> None:
    _check_root_scope(c)
    write_document(path, "circuit", circuit_to_document(c))
    logger.info("saved circuit to %s (%d nodes)", path, len(c))


def load_circuit(path: str) -> Circuit:
    return circuit_from_document(read_document(path, "circuit"))
