import os

import numpy as np
import pytest

from cltpc.data.bitmatrix import BitMatrix, CellState, MaskedBatch
from cltpc.models.clt import Clt

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATASETS_DIR = os.path.join(REPO_ROOT, "datasets")


def cpt(p_one_given_0, p_one_given_1):
    """2x2 log table [s, v] from P(x=1 | parent=s)."""
    return np.log([[1 - p_one_given_0, p_one_given_0], [1 - p_one_given_1, p_one_given_1]])


def prior(p_one):
    return np.log([[1 - p_one, p_one], [1 - p_one, p_one]])


def random_tree_clt(rng: np.random.Generator, v: int) -> Clt:
    """Random tree shape (each variable hangs below an earlier one) and CPTs in [0.05, 0.95]."""
    perm = rng.permutation(v)
    parent = [None] * v
    for k in range(1, v):
        parent[perm[k]] = int(perm[rng.integers(0, k)])
    factors = []
    for i in range(v):
        if parent[i] is None:
            factors.append(prior(rng.uniform(0.05, 0.95)))
        else:
            factors.append(cpt(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)))
    return Clt.build(parent, factors)


def random_mask(rng: np.random.Generator, x: np.ndarray, p: float = 0.5) -> MaskedBatch:
    cells = x.astype(np.int8).copy()
    cells[rng.random(x.shape) < p] = CellState.MARG
    return MaskedBatch(cells=cells)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def chain3() -> Clt:
    # 0 -> 1 -> 2
    return Clt.build([None, 0, 1], [prior(0.3), cpt(0.2, 0.9), cpt(0.6, 0.1)])


@pytest.fixture
def star5() -> Clt:
    return Clt.build([None, 0, 0, 0, 0],
                     [prior(0.4), cpt(0.1, 0.8), cpt(0.5, 0.3), cpt(0.7, 0.2), cpt(0.25, 0.65)])


@pytest.fixture
def six_var() -> Clt:
    #        0
    #      /   \
    #     1     2
    #    / \     \
    #   3   4     5
    return Clt.build(
        [None, 0, 0, 1, 1, 2],
        [prior(0.35), cpt(0.2, 0.7), cpt(0.6, 0.15), cpt(0.3, 0.85), cpt(0.9, 0.4), cpt(0.45, 0.05)],
    )


@pytest.fixture
def toy_bits() -> BitMatrix:
    return BitMatrix.from_array([[0, 0, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]])


def dataset_path(name: str) -> str:
    return os.path.join(DATASETS_DIR, name, f"{name}.train.data")
