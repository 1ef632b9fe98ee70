# cltpc/models/compile.py
from __future__ import annotations

import logging
from typing import Dict, List, Tuple

from .circuit import Circuit, Node, indicator_leaf, product_node, sum_node
from .clt import Clt

logger = logging.getLogger(__name__)


def compile_clt(model: Clt) -> Circuit:
    """
    Equivalent smooth, decomposable, deterministic circuit of a Chow-Liu tree.

    Per tree node i and value v a branch unit B(i, v) = Product(I(i, v), S(c, v) for each
    tree child c), or the bare indicator I(i, v) at a tree leaf. Per non-root i and
    parent state s a sum S(i, s) over (B(i, 0), B(i, 1)) weighted by P(x_i | x_pa = s).
    The root gets a single sum weighted by the prior. B(i, v) is shared by S(i, 0)
    and S(i, 1).
    """
    nodes: List[Node] = []
    kids = model.children()
    sums: Dict[Tuple[int, int], int] = {}  # (var, parent state) -> arena id

    def emit(node: Node) -> int:
        nodes.append(node)
        return len(nodes) - 1

    # reverse topological order: every referenced unit is already in the arena
    for i in (int(k) for k in model.topo_order[::-1]):
        ind = [emit(indicator_leaf(i, v)) for v in (0, 1)]
        if kids[i]:
            branch = [emit(product_node([ind[v]] + [sums[c, v] for c in kids[i]])) for v in (0, 1)]
        else:
            branch = ind
        if i == model.root:
            root = emit(sum_node(branch, model.log_factors[i, 0]))
        else:
            for s in (0, 1):
                sums[i, s] = emit(sum_node(branch, model.log_factors[i, s]))

    c = Circuit(var_count=model.var_count, nodes=tuple(nodes), root=root)
    logger.info("compiled Chow-Liu tree: V=%d -> %d sums, %d products, %d leaves",
                model.var_count, *c.counts())
    return c
