"""
Random-instance sweep: learned trees and their compiled circuits against the
enumeration oracle. Marked slow; deselect with `pytest -m "not slow"`.
"""
import numpy as np
import pytest
from scipy.special import logsumexp

from cltpc.data.bitmatrix import BitMatrix, CellState
from cltpc.inference.engine import pc_evi, pc_mar, pc_mpe
from cltpc.models.clt import clt_evi, clt_mar, clt_mpe, fit_clt
from cltpc.models.compile import compile_clt
from cltpc.oracle import all_assignments, brute_evi_table, brute_mar, brute_mpe

from .conftest import random_mask

ALPHAS = (0.0, 0.01, 1.0)
TOL = 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("instance", range(200))
def test_random_instance_against_oracle(instance):
    rng = np.random.default_rng(1000 + instance)
    v = int(rng.integers(2, 13))
    alpha = ALPHAS[instance % len(ALPHAS)]
    x = rng.integers(0, 2, size=(64, v)).astype(np.uint8)
    data = BitMatrix.from_array(x)
    model = fit_clt(data, alpha)
    c = compile_clt(model)
    batch = random_mask(rng, x, p=0.5)

    # normalization of both representations
    everything = BitMatrix.from_array(all_assignments(v))
    assert logsumexp(clt_evi(model, everything)) == pytest.approx(0.0, abs=TOL)
    np.testing.assert_allclose(pc_evi(c, everything), clt_evi(model, everything), atol=1e-9)

    table = brute_evi_table(model)
    np.testing.assert_allclose(clt_evi(model, data), table[x @ (1 << np.arange(v - 1, -1, -1))],
                               atol=TOL)

    mar_t, mar_c = clt_mar(model, batch), pc_mar(c, batch)
    mpe_t, mpe_c = clt_mpe(model, batch), pc_mpe(c, batch)
    np.testing.assert_allclose(mar_c, mar_t, atol=1e-9)
    np.testing.assert_allclose(mpe_c.log_value, mpe_t.log_value, atol=1e-9)
    for r in range(batch.rows):
        row = batch.cells[r]
        assert mar_t[r] == pytest.approx(brute_mar(model, row, table), abs=TOL)
        _, best = brute_mpe(model, row, table)
        assert mpe_t.log_value[r] == pytest.approx(best, abs=TOL)
        assert mpe_c.log_value[r] == pytest.approx(best, abs=TOL)

    observed = batch.cells != CellState.MARG
    np.testing.assert_array_equal(mpe_c.completion[observed], x[observed])
