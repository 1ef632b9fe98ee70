"""
Train-split log-likelihood targets on the public binary datasets. Needs the
datasets under datasets/<name>/<name>.train.data; skipped otherwise.
"""
import os

import numpy as np
import pytest

from cltpc.config import BENCH_DATASETS, DEFAULT_MASK_P, DEFAULT_SEED, REFERENCE_LL
from cltpc.data.bitmatrix import MaskSpec, gen_mask
from cltpc.inference.engine import pc_conditional_sample, pc_evi, pc_mar, pc_mpe
from cltpc.io.datatable import load_binary_csv
from cltpc.models.clt import clt_evi, fit_clt
from cltpc.models.compile import compile_clt

from .conftest import dataset_path

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module", params=sorted(BENCH_DATASETS))
def learned(request):
    name = request.param
    path = dataset_path(name)
    if not os.path.exists(path):
        pytest.skip(f"{name} not present at {path}")
    data = load_binary_csv(path)
    model = fit_clt(data)
    mask = gen_mask(data, MaskSpec(DEFAULT_MASK_P, DEFAULT_SEED))
    return name, data, model, compile_clt(model), mask


def test_shape(learned):
    name, data, *_ = learned
    assert data.shape == BENCH_DATASETS[name]


def test_evi_mean(learned):
    name, data, model, circuit, _ = learned
    evi, _, _ = REFERENCE_LL[name]
    tree_ll = float(np.mean(clt_evi(model, data)))
    assert tree_ll == pytest.approx(evi, abs=0.2)
    assert float(np.mean(pc_evi(circuit, data, jobs=4))) == pytest.approx(tree_ll, abs=1e-9)


def test_mar_and_mpe_means(learned):
    name, _, _, circuit, mask = learned
    _, mar, mpe = REFERENCE_LL[name]
    assert float(np.mean(pc_mar(circuit, mask, jobs=4))) == pytest.approx(mar, abs=0.5)
    assert float(np.mean(pc_mpe(circuit, mask, jobs=4).log_value)) == pytest.approx(mpe, abs=0.5)


def test_conditional_sampling_mean_near_evi(learned):
    name, _, _, circuit, mask = learned
    if name != "msweb":
        pytest.skip("sampling target is only recorded for msweb")
    out = pc_conditional_sample(circuit, mask, DEFAULT_SEED, jobs=4)
    assert float(np.mean(out.log_value)) == pytest.approx(-10.08, abs=0.1)
