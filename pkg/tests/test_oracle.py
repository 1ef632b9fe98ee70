import math

import numpy as np
import pytest
from scipy.special import logsumexp

from cltpc.data.bitmatrix import BitMatrix, CellState
from cltpc.errors import DimensionMismatch, TooManyVariables
from cltpc.inference.engine import pc_evi
from cltpc.models.clt import Clt, clt_evi
from cltpc.models.compile import compile_clt
from cltpc.oracle import all_assignments, brute_evi_table, brute_mar, brute_mpe

from .conftest import prior, random_tree_clt

M = CellState.MARG


def test_all_assignments_order():
    assert all_assignments(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert all_assignments(5).shape == (32, 5)


def test_enumeration_cap():
    with pytest.raises(TooManyVariables):
        all_assignments(21)


def test_fair_coin_table():
    table = brute_evi_table(Clt.build([None], [prior(0.5)]))
    np.testing.assert_allclose(table, [math.log(0.5)] * 2, atol=1e-15)


def test_chain_circuit_table_matches_engine_and_tree(chain3):
    c = compile_clt(chain3)
    x = BitMatrix.from_array(all_assignments(3))
    table = brute_evi_table(c)
    np.testing.assert_allclose(table, pc_evi(c, x), atol=1e-12)
    np.testing.assert_allclose(table, brute_evi_table(chain3), atol=1e-12)
    np.testing.assert_allclose(table, clt_evi(chain3, x), atol=1e-12)


@pytest.mark.parametrize("v", [1, 5, 10])
def test_tables_normalize(rng, v):
    model = random_tree_clt(rng, v)
    assert logsumexp(brute_evi_table(model)) == pytest.approx(0.0, abs=1e-9)
    assert logsumexp(brute_evi_table(compile_clt(model))) == pytest.approx(0.0, abs=1e-9)


def test_all_marg_and_no_marg(six_var):
    table = brute_evi_table(six_var)
    assert brute_mar(six_var, [M] * 6, table) == pytest.approx(0.0, abs=1e-12)
    row = [1, 0, 0, 1, 1, 0]
    expected = clt_evi(six_var, BitMatrix.from_array([row]))[0]
    assert brute_mar(six_var, row, table) == pytest.approx(expected, abs=1e-12)
    completion, value = brute_mpe(six_var, row, table)
    assert completion.tolist() == row
    assert value == pytest.approx(expected, abs=1e-12)


def test_mpe_ties_go_to_smallest_completion():
    completion, value = brute_mpe(Clt.build([None], [prior(0.5)]), [M])
    assert completion.tolist() == [0]
    assert value == pytest.approx(math.log(0.5))


def test_mask_width_is_checked(chain3):
    with pytest.raises(DimensionMismatch):
        brute_mar(chain3, [0, 1])
