import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp as scipy_logsumexp

from cltpc.data.bitmatrix import BitMatrix, CellState, MaskedBatch, MaskSpec, gen_mask
from cltpc.errors import DimensionMismatch, ZeroEvidenceProbability
from cltpc.inference.engine import (
    EvalBuffer, pc_conditional_sample, pc_evi, pc_mar, pc_mpe, pc_sample,
)
from cltpc.inference.logspace import logsumexp
from cltpc.inference.parallel import block_bounds, map_blocks
from cltpc.models.circuit import Circuit, leaf_node, product_node, sum_node
from cltpc.models.clt import Clt, clt_sample
from cltpc.models.compile import compile_clt
from cltpc.oracle import all_assignments, brute_evi_table, brute_mar, brute_mpe

from .conftest import prior, random_mask, random_tree_clt

M = CellState.MARG


def cells(rows):
    return MaskedBatch(cells=np.array(rows, dtype=np.int8))


# ---------- block partitioning ----------

def test_block_bounds_cover_rows_in_order():
    assert block_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert block_bounds(3, 2048) == [(0, 3)]
    with pytest.raises(ValueError):
        block_bounds(10, 0)


def test_map_blocks_keeps_block_order():
    out = map_blocks(lambda s, e: list(range(s, e)), 23, jobs=4, block_rows=5)
    assert sum(out, []) == list(range(23))


def test_eval_buffer_shapes():
    buf = EvalBuffer.allocate(7, 3, np.float32, with_choice=True)
    assert buf.values.shape == (7, 3) and buf.values.dtype == np.float32
    assert buf.choice.shape == (7, 3)
    assert EvalBuffer.allocate(2, 2, np.float64).choice is None


def test_logsumexp_binary_and_wide_agree_with_scipy():
    a = np.array([[0.0, -np.inf, -1.5, -np.inf], [-2.0, -np.inf, 3.0, 0.25], [-0.5, -1.0, 1.0, -np.inf]])
    for width in (2, 3):
        got = logsumexp(a[:width], axis=0)
        with np.errstate(divide="ignore"):
            want = scipy_logsumexp(a[:width], axis=0)
        np.testing.assert_allclose(got, want, atol=1e-12)
    assert logsumexp(a[:2, 1], axis=0) == -np.inf
    assert logsumexp(a[:2].astype(np.float32), axis=0).dtype == np.float32


# ---------- EVI / MAR ----------

def test_single_leaf_evi():
    c = Circuit(1, (leaf_node(0, np.log([0.3, 0.7])),), root=0)
    assert c.counts() == (0, 0, 1)
    assert c.report.smooth and c.report.decomposable
    np.testing.assert_allclose(pc_evi(c, BitMatrix.from_array([[0], [1]])),
                               np.log([0.3, 0.7]), atol=1e-15)


def test_mar_all_marginalized_is_zero(six_var):
    out = pc_mar(compile_clt(six_var), cells(np.full((5, 6), M)))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_evi_normalizes(rng):
    model = random_tree_clt(rng, 10)
    values = pc_evi(compile_clt(model), BitMatrix.from_array(all_assignments(10)))
    assert scipy_logsumexp(values) == pytest.approx(0.0, abs=1e-9)


def test_mar_without_marg_equals_evi_exactly(six_var):
    c = compile_clt(six_var)
    x = clt_sample(six_var, 64, seed=1)
    np.testing.assert_array_equal(pc_mar(c, MaskedBatch.from_bitmatrix(x)), pc_evi(c, x))


@pytest.mark.parametrize("v", [2, 6, 11])
def test_mar_matches_enumeration(rng, v):
    c = compile_clt(random_tree_clt(rng, v))
    batch = random_mask(rng, rng.integers(0, 2, size=(30, v)).astype(np.uint8))
    table = brute_evi_table(c)
    got = pc_mar(c, batch)
    for r in range(batch.rows):
        assert got[r] == pytest.approx(brute_mar(c, batch.cells[r], table), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_mar_bounded_by_evi_and_zero(seed, p):
    model = random_tree_clt(np.random.default_rng(seed), 6)
    c = compile_clt(model)
    x = clt_sample(model, 20, seed=seed)
    batch = gen_mask(x, MaskSpec(p, seed))
    observed = batch.cells != M
    np.testing.assert_array_equal(batch.cells[observed], x.to_array()[observed])
    mar = pc_mar(c, batch)
    assert (mar >= pc_evi(c, x) - 1e-12).all()
    assert (mar <= 1e-12).all()


def test_rejects_wrong_width(six_var):
    with pytest.raises(DimensionMismatch):
        pc_mar(compile_clt(six_var), cells([[0, 1, 0]]))


# ---------- MPE ----------

def test_mpe_without_marg_returns_evidence(six_var):
    c = compile_clt(six_var)
    x = clt_sample(six_var, 40, seed=3)
    out = pc_mpe(c, MaskedBatch.from_bitmatrix(x))
    np.testing.assert_array_equal(out.completion, x.to_array())
    np.testing.assert_array_equal(out.log_value, pc_evi(c, x))
    assert out.exact


@pytest.mark.parametrize("v", [1, 4, 9])
def test_mpe_matches_enumeration(rng, v):
    c = compile_clt(random_tree_clt(rng, v))
    batch = random_mask(rng, rng.integers(0, 2, size=(40, v)).astype(np.uint8), p=0.6)
    table = brute_evi_table(c)
    out = pc_mpe(c, batch)
    for r in range(batch.rows):
        best_x, best = brute_mpe(c, batch.cells[r], table)
        assert out.log_value[r] == pytest.approx(best, abs=1e-9)
        np.testing.assert_array_equal(out.completion[r], best_x)
    observed = batch.cells != M
    np.testing.assert_array_equal(out.completion[observed], batch.cells[observed])


def test_mpe_on_a_mixture_is_flagged_approximate():
    # two fully factorized components over the same scope: not deterministic
    c = Circuit(2, (
        leaf_node(0, np.log([0.9, 0.1])), leaf_node(1, np.log([0.2, 0.8])),
        leaf_node(0, np.log([0.4, 0.6])), leaf_node(1, np.log([0.7, 0.3])),
        product_node([0, 1]), product_node([2, 3]),
        sum_node([4, 5], np.log([0.5, 0.5])),
    ), root=6)
    out = pc_mpe(c, cells([[M, M]]))
    assert not out.exact
    _, best = brute_mpe(c, [M, M])
    assert out.log_value[0] <= best + 1e-12
    assert out.log_value[0] == pytest.approx(pc_evi(c, BitMatrix.from_array(out.completion))[0])


# ---------- parallelism and precision ----------

@pytest.mark.parametrize("jobs", [2, 4])
def test_results_independent_of_jobs(rng, six_var, jobs):
    c = compile_clt(six_var)
    x = clt_sample(six_var, 500, seed=4)
    batch = random_mask(rng, x.to_array())
    one = dict(jobs=1, block_rows=32)
    many = dict(jobs=jobs, block_rows=32)
    np.testing.assert_array_equal(pc_evi(c, x, **one), pc_evi(c, x, **many))
    np.testing.assert_array_equal(pc_mar(c, batch, **one), pc_mar(c, batch, **many))
    np.testing.assert_array_equal(pc_mpe(c, batch, **one).completion,
                                  pc_mpe(c, batch, **many).completion)
    a = pc_conditional_sample(c, batch, 99, **one)
    b = pc_conditional_sample(c, batch, 99, **many)
    np.testing.assert_array_equal(a.completions.to_array(), b.completions.to_array())
    np.testing.assert_array_equal(a.log_value, b.log_value)


def test_single_precision_close_to_double(rng):
    model = random_tree_clt(rng, 12)
    c = compile_clt(model)
    batch = random_mask(rng, clt_sample(model, 300, seed=5).to_array())
    lo = pc_mar(c, batch, precision=32)
    assert lo.dtype == np.float32
    np.testing.assert_allclose(lo, pc_mar(c, batch, precision=64), atol=1e-3)
    np.testing.assert_allclose(pc_mpe(c, batch, precision=32).log_value,
                               pc_mpe(c, batch, precision=64).log_value, atol=1e-3)


# ---------- sampling ----------

def test_conditional_sampling_matches_exact_conditionals(six_var):
    c = compile_clt(six_var)
    evidence = [1, M, M, 0, M, 1]
    n = 200000
    out = pc_conditional_sample(c, cells([evidence] * n), seed=2024)
    x = out.completions.to_array()
    table = brute_evi_table(six_var)
    log_e = brute_mar(six_var, evidence, table)
    for j in (1, 2, 4):
        with_one = list(evidence)
        with_one[j] = 1
        exact = math.exp(brute_mar(six_var, with_one, table) - log_e)
        assert x[:, j].mean() == pytest.approx(exact, abs=0.01)
    assert (x[:, [0, 3, 5]] == [1, 0, 1]).all()


def test_conditional_sampling_without_marg_returns_evidence(six_var):
    c = compile_clt(six_var)
    x = clt_sample(six_var, 25, seed=6)
    out = pc_conditional_sample(c, MaskedBatch.from_bitmatrix(x), seed=1)
    np.testing.assert_array_equal(out.completions.to_array(), x.to_array())
    np.testing.assert_array_equal(out.log_value, pc_evi(c, x))


def test_conditional_sampling_is_seeded(rng, six_var):
    c = compile_clt(six_var)
    batch = random_mask(rng, clt_sample(six_var, 300, seed=7).to_array())
    a = pc_conditional_sample(c, batch, seed=5)
    b = pc_conditional_sample(c, batch, seed=5)
    np.testing.assert_array_equal(a.completions.to_array(), b.completions.to_array())
    np.testing.assert_array_equal(a.log_value, pc_evi(c, a.completions))
    other = pc_conditional_sample(c, batch, seed=6)
    assert not np.array_equal(a.completions.to_array(), other.completions.to_array())


def test_zero_probability_evidence():
    model = Clt.build([None, 0], [np.log([[1.0, 0.0], [1.0, 0.0]]), np.log([[0.5, 0.5], [0.5, 0.5]])])
    c = compile_clt(model)
    with pytest.raises(ZeroEvidenceProbability) as exc:
        pc_conditional_sample(c, cells([[0, M], [1, M]]), seed=0)
    assert exc.value.rows == [1]
    with pytest.raises(ZeroEvidenceProbability) as exc:
        pc_mpe(c, cells([[M, 1], [1, 0], [0, M]]))
    assert exc.value.rows == [1]


def test_unconditional_sampling_matches_joint(chain3):
    x = pc_sample(compile_clt(chain3), 200000, seed=17).to_array()
    empirical = np.bincount(x @ np.array([4, 2, 1]), minlength=8) / x.shape[0]
    exact = np.exp(brute_evi_table(chain3))
    assert 0.5 * np.abs(empirical - exact).sum() < 0.01


def test_fair_coin_sampling():
    x = pc_sample(compile_clt(Clt.build([None], [prior(0.5)])), 100000, seed=3).to_array()
    assert x.mean() == pytest.approx(0.5, abs=0.01)
