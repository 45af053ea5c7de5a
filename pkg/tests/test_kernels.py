"""Both kernel backends must make identical decisions.

Exponentials come from different libm code paths, so costs may differ in the
last ulp; feasibility, weights, samples and chosen masks must match exactly.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ompc import _kernels as K

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 6))
def test_subset_costs_agree(seed, s, m):
    rng = np.random.default_rng(seed)
    D = rng.uniform(0, 0.7, size=(s, m)) * (rng.random((s, m)) < 0.6)
    cover = rng.uniform(0.1, 1.2, size=s)
    F = rng.uniform(0, 3, size=m)
    a = K.subset_costs_numpy(D, cover, F, np.log(1.5), 1e-12)
    b = K.subset_costs_numba(D, cover, F, np.log(1.5), 1e-12)
    assert np.array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    np.testing.assert_allclose(a[fin], b[fin], rtol=1e-13, atol=1e-15)
    assert K.pick_mask_numpy(a, 1e-12) == K.pick_mask_numba(b, 1e-12)


def test_pick_mask_tie_goes_to_lex_smallest():
    # masks 0b011 -> (0,1) and 0b101 -> (0,2) tie; (0,1) is smaller
    costs = np.full(8, np.inf)
    costs[0b101] = 1.0
    costs[0b011] = 1.0
    costs[0b100] = 1.0 + 1e-6
    assert K.pick_mask_numpy(costs, 1e-12)[0] == 0b011
    assert K.pick_mask_numba(costs, 1e-12)[0] == 0b011
    # (0, 2) precedes (1,)
    costs = np.full(8, np.inf)
    costs[0b101] = 2.0
    costs[0b010] = 2.0
    assert K.pick_mask_numpy(costs, 1e-12)[0] == 0b101
    assert K.pick_mask_numba(costs, 1e-12)[0] == 0b101


def test_pick_mask_infeasible():
    assert K.pick_mask_numpy(np.full(4, np.inf), 1e-12)[0] == -1
    assert K.pick_mask_numba(np.full(4, np.inf), 1e-12)[0] == -1


@given(st.integers(0, 2**32 - 1))
def test_steiner_weights_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    idx = rng.choice(len(pairs), size=min(len(pairs), int(rng.integers(2, 10))), replace=False)
    eu = np.array([pairs[i][0] for i in idx], dtype=np.int64)
    ev = np.array([pairs[i][1] for i in idx], dtype=np.int64)
    w = rng.integers(1, 9, size=len(idx)).astype(np.float64)
    bounds = rng.integers(1, 4, size=n).astype(np.int64)
    ds = np.array([0], dtype=np.int64)
    dt = np.array([n - 1], dtype=np.int64)
    a = K.steiner_weights_numpy(eu, ev, w, bounds, ds, dt, n)
    b = K.steiner_weights_numba(eu, ev, w, bounds, ds, dt, n)
    assert np.array_equal(a, b)


@given(st.integers(0, 2**32 - 1))
def test_ompc_alpha_agree(seed):
    rng = np.random.default_rng(seed)
    N, m, J = int(rng.integers(1, 9)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    P = rng.uniform(0, 1, size=(N, m))
    C = rng.uniform(0, 1, size=(N, J)) * (rng.random((N, J)) < 0.7)
    assert np.array_equal(K.ompc_alpha_numpy(P, C, 1e-12), K.ompc_alpha_numba(P, C, 1e-12))


@given(st.integers(0, 2**32 - 1))
def test_sampling_and_loads_agree(seed):
    rng = np.random.default_rng(seed)
    rows = int(rng.integers(1, 20))
    lengths = rng.integers(1, 5, size=rows)
    ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    cdf = np.empty(ptr[-1])
    for r in range(rows):
        p = rng.dirichlet(np.ones(lengths[r]))
        cdf[ptr[r]:ptr[r + 1]] = np.cumsum(p)
        cdf[ptr[r + 1] - 1] = 1.0
    draws = 1.0 - rng.random(rows)
    a = K.sample_rows_numpy(ptr, cdf, draws)
    b = K.sample_rows_numba(ptr, cdf, draws)
    assert np.array_equal(a, b)
    pair_len = rng.integers(0, 4, size=ptr[-1])
    pair_ptr = np.concatenate([[0], np.cumsum(pair_len)]).astype(np.int64)
    pair_edges = rng.integers(0, 7, size=pair_ptr[-1]).astype(np.int64)
    assert np.array_equal(K.edge_loads_numpy(a, pair_ptr, pair_edges, 7), K.edge_loads_numba(b, pair_ptr, pair_edges, 7))


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setattr(K, "USE_NUMBA", False)
    assert K.backend_name() == "numpy"
    assert K._backend("ompc_alpha") is K.ompc_alpha_numpy


def test_env_flag_in_subprocess():
    import os
    import subprocess
    import sys

    env = dict(os.environ, OMPC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from ompc import _kernels; print(_kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
