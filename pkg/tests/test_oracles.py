import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ompc.core import DEFAULT_PARAMS, CoveringConstraint, OnlineSolver, PackingSystem, tau_from_delta
from ompc.errors import OracleCapacityError
from ompc.graphs import WeightedGraph, fig_ssf_instance
from ompc.instances import random_planted_ompc, random_steiner_instance
from ompc.oracles import (
    BranchAndBoundOracle,
    ExactEnumerationOracle,
    exact_path_enumeration,
    marginal_costs,
    path_delta,
    path_oracle,
    path_tau,
    simple_paths,
)


def test_enumeration_cap():
    sys = PackingSystem(1, 1, {i: [(0, 0.01)] for i in range(25)})
    C = CoveringConstraint({i: 1.0 for i in range(25)})
    with pytest.raises(OracleCapacityError):
        ExactEnumerationOracle(cap=20)(C, OnlineSolver(sys))


def test_enumeration_ties_go_to_smallest_ids():
    sys = PackingSystem(1, 1, {"a": [(0, 0.5)], "b": [(0, 0.5)], "c": [(0, 0.5)]})
    C = CoveringConstraint({"c": 1.0, "b": 1.0, "a": 1.0})
    assert ExactEnumerationOracle()(C, OnlineSolver(sys)) == ("a",)
    assert BranchAndBoundOracle()(C, OnlineSolver(sys)) == ("a",)


def test_enumeration_needs_combination():
    sys = PackingSystem(2, 1, {"a": [(0, 0.5)], "b": [(1, 0.5)], "c": [(0, 0.9), (1, 0.9)]})
    C = CoveringConstraint({"a": 0.5, "b": 0.5, "c": 1.0})
    # {a,b}: 2 (1.5**0.5 - 1) = 0.449; {c}: 2 (1.5**0.9 - 1) = 0.881
    assert ExactEnumerationOracle()(C, OnlineSolver(sys)) == ("a", "b")


@given(st.integers(0, 2**32 - 1))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_planted_ompc(rng, max_support=8)
    s1, s2 = OnlineSolver(inst.system), OnlineSolver(inst.system)
    for C in inst.constraints:
        a = s1.arrive(C, ExactEnumerationOracle())
        b = s2.arrive(C, BranchAndBoundOracle())
        assert a == b
    assert np.array_equal(s1.F, s2.F)


def test_branch_and_bound_infeasible():
    sys = PackingSystem(1, 1, {"a": [(0, 2.0)]})
    assert BranchAndBoundOracle()(CoveringConstraint({"a": 1.0}), OnlineSolver(sys)) is None


# ---------------------------------------------------------------------------
# path oracles


def test_path_delta_rows():
    g, _ = fig_ssf_instance()
    d = path_delta(g, [0, 1], budget=4.0)
    assert d.tolist() == pytest.approx([2 / 3, 1 / 3, 0, 1 / 3, 0, 0, 0.5])


def test_path_oracle_uses_virtual_edges():
    g = WeightedGraph.build(4, [(0, 1, 5), (1, 2, 1), (2, 3, 1), (0, 3, 9)], 2)
    F = np.zeros(5)
    # virtual (0, 2) makes 0 ~ 2 free
    assert path_oracle(g, 0, 3, [(0, 2)], F, 10.0, DEFAULT_PARAMS) == (2,)
    assert path_oracle(g, 0, 2, [(0, 2)], F, 10.0, DEFAULT_PARAMS) == ()


def test_path_oracle_respects_budget_and_bounds():
    g = WeightedGraph.build(3, [(0, 1, 1), (1, 2, 1), (0, 2, 5)], [1, 1, 1])
    F = np.zeros(4)
    # vertex 1 has bound 1 so it cannot be interior; the direct edge exceeds the budget
    assert path_oracle(g, 0, 2, [], F, 4.0, DEFAULT_PARAMS) is None
    assert path_oracle(g, 0, 2, [], F, 5.0, DEFAULT_PARAMS) == (2,)


def test_surrogate_sandwich():
    rng = np.random.default_rng(5)
    g = random_steiner_instance(rng).graph
    F = rng.uniform(0, 2, size=g.n + 1)
    costs = marginal_costs(g, F, 30.0, DEFAULT_PARAMS)
    ratio = (DEFAULT_PARAMS.rho - 1) / DEFAULT_PARAMS.log_rho
    for path in simple_paths(g, 0, g.n - 1, [], 30.0):
        real = [e for e in path if e >= 0]
        d = path_delta(g, real, 30.0)
        if np.any(d > 1):
            continue
        sur = sum(costs[e] for e in real)
        t = tau_from_delta(F, d, DEFAULT_PARAMS.log_rho)
        assert sur <= t * (1 + 1e-12)
        assert t <= ratio * sur * (1 + 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_path_oracle_within_surrogate_factor_of_exact(seed):
    rng = np.random.default_rng(seed)
    inst = random_steiner_instance(rng, max_n=8, max_edges=12)
    g = inst.graph
    F = rng.uniform(0, 2, size=g.n + 1)
    budget = float(rng.uniform(0.5, 1.5) * g.total_weight())
    s, t = inst.demands[0]
    virtual = inst.demands[1:3]
    approx = path_oracle(g, s, t, virtual, F, budget, DEFAULT_PARAMS)
    exact = exact_path_enumeration(g, s, t, virtual, F, budget, DEFAULT_PARAMS)
    assert (approx is None) == (exact is None)
    if exact is None:
        return
    ratio = (DEFAULT_PARAMS.rho - 1) / DEFAULT_PARAMS.log_rho
    ta = path_tau(g, approx, F, budget, DEFAULT_PARAMS)
    te = path_tau(g, exact, F, budget, DEFAULT_PARAMS)
    assert te <= ta * (1 + 1e-9) + 1e-15
    assert ta <= ratio * te * (1 + 1e-9) + 1e-15
    # the label-setting result minimises the surrogate over all admissible paths
    costs = marginal_costs(g, F, budget, DEFAULT_PARAMS)
    best = min(
        (sum(costs[e] for e in p if e >= 0) for p in simple_paths(g, s, t, virtual, budget)
         if np.all(path_delta(g, [e for e in p if e >= 0], budget) <= 1 + 1e-12)),
        default=math.inf,
    )
    assert sum(costs[e] for e in approx) == pytest.approx(best, rel=1e-12, abs=1e-15)


def test_exact_path_enumeration_cap():
    g = WeightedGraph.build(16, [(i, i + 1, 1) for i in range(15)], 2)
    with pytest.raises(OracleCapacityError):
        exact_path_enumeration(g, 0, 15, [], np.zeros(17), 20.0, DEFAULT_PARAMS)


def test_simple_paths_count():
    g, _ = fig_ssf_instance()
    # a tree has exactly one path between any two vertices
    assert len(list(simple_paths(g, 1, 4, [], 10.0))) == 1
    assert len(list(simple_paths(g, 2, 5, [(1, 4)], 10.0))) == 2
