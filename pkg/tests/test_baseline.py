import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ompc.baseline import (
    cached,
    check_steiner_witness,
    offline_ipgood_opt,
    offline_ompc_opt,
    offline_steiner_opt,
    sf_witness_alpha,
)
from ompc.core import CoveringConstraint, PackingSystem
from ompc.errors import CapacityError, InfeasibleError
from ompc.graphs import WeightedGraph, fig_ssf_instance
from ompc.instances import random_planted_ompc, sample_solvable_steiner
from ompc.steiner import ip_load_profile


def test_single_variable():
    sys = PackingSystem(1, 1, {"a": [(0, 0.7)]})
    res = offline_ompc_opt(sys, [CoveringConstraint({"a": 1.0})])
    assert res.value == pytest.approx(0.7)
    assert res.witness == ["a"]


def test_unsatisfiable():
    sys = PackingSystem(1, 1, {"a": [(0, 0.7)], "b": [(0, 0.1)]})
    with pytest.raises(InfeasibleError):
        offline_ompc_opt(sys, [CoveringConstraint({"a": 0.4, "b": 0.5})])


def test_variable_cap():
    sys = PackingSystem(1, 1, {i: [(0, 0.1)] for i in range(23)})
    with pytest.raises(CapacityError):
        offline_ompc_opt(sys, [CoveringConstraint({0: 1.0})])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_planted_instances_have_value_at_most_one(seed):
    inst = random_planted_ompc(np.random.default_rng(seed), max_constraints=6)
    if len(inst.system.variables()) > 22:
        return
    res = offline_ompc_opt(inst.system, inst.constraints)
    assert res.value <= 1.0 + 1e-12
    # independent re-validation of the witness
    load = inst.system.load_vector(res.witness)
    assert load.max() == pytest.approx(res.value)
    assert all(C.coverage(res.witness) >= 1 - 1e-12 for C in inst.constraints)


def test_fig_instance_steiner_opt():
    g, D = fig_ssf_instance()
    res = offline_steiner_opt(g, D)
    assert res.value == 5.0
    assert check_steiner_witness(g, D, res.witness)


def test_path_graph():
    g = WeightedGraph.build(4, [(0, 1, 2), (1, 2, 3.5), (2, 3, 1)], 2)
    assert offline_steiner_opt(g, [(0, 3)]).value == 6.5


def test_degree_bound_forces_detour():
    # vertex 1 may touch only one edge, so 0-1-2 is forbidden and 0-3-2 is used
    g = WeightedGraph.build(4, [(0, 1, 1), (1, 2, 1), (0, 3, 2), (2, 3, 2)], [2, 1, 2, 2])
    res = offline_steiner_opt(g, [(0, 2)])
    assert res.value == 4.0
    assert sorted(res.witness) == [2, 3]


def test_steiner_infeasible_and_cap():
    g = WeightedGraph.build(3, [(0, 1, 1), (1, 2, 1)], [2, 1, 2])
    with pytest.raises(InfeasibleError):
        offline_steiner_opt(g, [(0, 2)])
    big = WeightedGraph.build(20, [(i, i + 1, 1) for i in range(19)], 2)
    with pytest.raises(CapacityError):
        offline_steiner_opt(big, [(0, 19)])


def test_fig_instance_ipgood():
    g, D = fig_ssf_instance()
    res = offline_ipgood_opt(g, D, 5.0)
    assert res.value == pytest.approx(4 / 3)
    H1, H2 = res.witness
    assert sorted(g.edges[e][:2] for e in H1) == [(0, 1), (0, 3), (3, 4)]
    assert sorted(g.edges[e][:2] for e in H2) == [(1, 2), (3, 4), (3, 5)]
    assert sum(g.weight(e) for H in res.witness for e in H) == 6.0
    deg_v4 = sum(1 for H in res.witness for e in H if 3 in g.endpoints(e))
    assert deg_v4 == 4
    assert ip_load_profile(g, res.witness, 5.0).max() == pytest.approx(res.value)


def test_single_demand_ipgood():
    g = WeightedGraph.build(4, [(0, 1, 1), (1, 3, 1), (0, 2, 1), (2, 3, 3)], 2)
    res = offline_ipgood_opt(g, [(0, 3)], 2.0)
    # best path 0-1-3: degree loads 1/2, weight 2/2
    assert res.value == 1.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_ipgood_dominates_forest_alpha(seed):
    rng = np.random.default_rng(seed)
    inst, sf, ip = sample_solvable_steiner(rng, max_n=8, max_edges=12)
    alpha_sf = sf_witness_alpha(inst.graph, sf.witness, sf.value)
    assert alpha_sf <= 1.0 + 1e-12
    assert ip.value >= alpha_sf - 1e-12
    assert ip.value >= 1.0 - 1e-12
    assert check_steiner_witness(inst.graph, inst.demands, sf.witness)


def test_ipgood_cap():
    n = 10
    edges = [(u, v, 1) for u in range(n) for v in range(u + 1, n)][:18]
    g = WeightedGraph.build(n, edges, 9)
    with pytest.raises(CapacityError):
        offline_ipgood_opt(g, [(0, 9), (1, 8), (2, 7)], 5.0, cap=1000)


def test_disk_cache(tmp_path):
    calls = []

    def compute():
        calls.append(1)
        return {"value": 3}

    assert cached(str(tmp_path), "x", {"a": 1}, compute) == {"value": 3}
    assert cached(str(tmp_path), "x", {"a": 1}, compute) == {"value": 3}
    assert len(calls) == 1
    assert cached(str(tmp_path), "x", {"a": 2}, compute) == {"value": 3}
    assert len(calls) == 2
