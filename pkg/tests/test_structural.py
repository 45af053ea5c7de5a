import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ompc.errors import InstanceError, SizeError
from ompc.structural import (
    LoadAssignment,
    Tree,
    assignment_from_rows,
    build_connective,
    check_split,
    marginal_frequencies,
    random_connective_instance,
    random_load_assignment,
    random_tree,
    round_assignment,
    split_tree,
    verify_connective,
)


def path_tree(n):
    return Tree(n, [(i, i + 1) for i in range(n - 1)])


class TestSplit:
    def test_three_vertex_path(self):
        s = split_tree(path_tree(3))
        assert s.V1 == {0, 1, 2} and s.E1 == {0, 1}
        assert s.V2 == {2} and s.E2 == set()
        assert s.V1 & s.V2 == {2}
        assert check_split(path_tree(3), s) == []

    def test_balanced_binary_tree(self):
        t = Tree(7, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)])
        s = split_tree(t)
        assert s.pivot == 1
        assert s.V2 == {1, 3, 4}
        assert s.V1 == {0, 1, 2, 5, 6}
        assert check_split(t, s) == []

    def test_too_small(self):
        with pytest.raises(SizeError):
            split_tree(path_tree(2))

    def test_bad_tree(self):
        with pytest.raises(InstanceError):
            Tree(4, [(0, 1), (1, 2), (2, 0)])

    @given(st.integers(0, 2**32 - 1), st.integers(3, 200))
    def test_invariants(self, seed, n):
        t = random_tree(n, np.random.default_rng(seed))
        s = split_tree(t)
        assert check_split(t, s) == []
        assert s.E1 | s.E2 == set(range(n - 1)) and not s.E1 & s.E2
        if n >= 5:
            assert max(s.sizes()) < n

    def test_check_split_detects_problems(self):
        t = path_tree(5)
        s = split_tree(t)
        broken = type(s)(s.pivot, s.V1, s.E1 | s.E2, s.V2, s.E2)
        assert check_split(t, broken)


class TestConnective:
    def test_single_demand_is_the_path(self):
        Q = build_connective(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], [(1, 4)])
        assert Q.Q == [frozenset({1, 2, 3})]
        assert Q.max_multiplicity == 1

    def test_same_side_demands_follow_the_recursion(self):
        edges = [(i, i + 1) for i in range(5)]
        # the split keeps {0..4} on one side; both demands stay there
        s = split_tree(path_tree(6))
        assert s.V1 == {0, 1, 2, 3, 4} and s.V2 == {4, 5}
        Q = build_connective(6, edges, [(0, 2), (1, 3)])
        assert Q.Q == [frozenset({0, 1}), frozenset({1, 2})]

    def test_second_crossing_pair_uses_derived_pairs(self):
        edges = [(i, i + 1) for i in range(5)]
        Q = build_connective(6, edges, [(3, 5), (2, 5)])
        # the first crossing pair takes its path; (2,5) becomes (2,3) on one side and (5,5) on the other
        assert Q.Q == [frozenset({3, 4}), frozenset({2})]
        assert verify_connective(Q, 6, edges, [(3, 5), (2, 5)]).ok

    def test_connected_by_earlier_demands_is_empty(self):
        edges = [(0, 1), (1, 2)]
        Q = build_connective(3, edges, [(0, 1), (1, 2), (0, 2)])
        assert Q.Q[2] == frozenset()

    def test_forest_components(self):
        edges = [(0, 1), (2, 3), (3, 4)]
        Q = build_connective(5, edges, [(2, 4), (0, 1)])
        assert Q.Q == [frozenset({1, 2}), frozenset({0})]
        with pytest.raises(InstanceError):
            build_connective(5, edges, [(0, 4)])

    def test_verifier_rejects_missing_subgraph(self):
        edges = [(0, 1), (1, 2)]
        rep = verify_connective([frozenset()], 3, edges, [(0, 2)])
        assert not rep.ok

    def test_verifier_rejects_excess_multiplicity(self):
        edges = [(0, 1)]
        demands = [(0, 1)] * 5
        rep = verify_connective([frozenset({0})] * 5, 2, edges, demands)
        assert not rep.ok
        assert any("edge 0" in p for p in rep.problems)

    def test_verifier_literal_cut(self):
        edges = [(0, 1), (1, 2), (2, 3)]
        # Q_2 skips vertex 2 entirely but cutting {2} separates neither earlier demand endpoint
        rep = verify_connective([frozenset({0, 1, 2}), frozenset()], 4, edges, [(0, 3), (0, 3)])
        assert rep.ok and rep.cut_checked
        rep = verify_connective([frozenset({0}), frozenset({0, 1, 2})], 4, edges, [(0, 1), (0, 3)])
        assert rep.ok

    @given(st.integers(0, 2**32 - 1))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        n, edges, demands = random_connective_instance(rng, max_n=64, max_demands=20)
        rep = verify_connective(build_connective(n, edges, demands), n, edges, demands)
        assert rep.ok, rep.problems

    @given(st.integers(0, 2**32 - 1))
    def test_literal_cut_reading_small(self, seed):
        rng = np.random.default_rng(seed)
        n, edges, demands = random_connective_instance(rng, max_n=12, max_demands=10)
        rep = verify_connective(build_connective(n, edges, demands), n, edges, demands)
        assert rep.ok and (rep.cut_checked or n > 12), rep.problems


class TestRounding:
    def two_vertex(self):
        return assignment_from_rows(Tree(2, [(0, 1)]), [0, 1], [[(0, 1.0)]])

    def test_single_entry(self):
        p = self.two_vertex()
        for seed in range(5):
            q = round_assignment(p, seed)
            assert q.q_matrix().tolist() == [1]

    def test_inverse_cdf_by_hand(self):
        p = assignment_from_rows(path_tree(3), [0, 1, 2], [[(0, 1.0)], [(0, 0.5), (1, 0.5)]])
        q = round_assignment(p, draws=[0.9, 0.3])
        assert q.q_matrix().tolist() == [1, 1, 0]
        q = round_assignment(p, draws=[0.9, 0.7])
        assert q.q_matrix().tolist() == [1, 0, 1]
        q = round_assignment(p, draws=[1.0, 0.5])
        assert q.q_matrix().tolist() == [1, 1, 0]

    def test_bad_row_sum(self):
        with pytest.raises(InstanceError):
            assignment_from_rows(path_tree(3), [0, 1, 2], [[(0, 1.0)], [(0, 0.5), (1, 0.4)]])
        with pytest.raises(InstanceError):
            assignment_from_rows(path_tree(3), [0, 1, 2], [[(0, 1.0)], [(0, 0.5), (2, 0.5)]])

    def test_loads(self):
        p = assignment_from_rows(path_tree(3), [0, 1, 2], [[(0, 1.0)], [(0, 0.25), (1, 0.75)]])
        assert p.edge_loads().tolist() == [1.25, 1.0]
        q = round_assignment(p, draws=[0.5, 0.1])
        assert q.edge_loads().tolist() == [2, 1]

    def test_marginals_five_rows(self):
        p = five_row_instance()
        freq = marginal_frequencies(p, 10_000, seed=11)
        sigma = np.sqrt(p.probs * (1 - p.probs) / 10_000)
        assert np.all(np.abs(freq - p.probs) <= 3 * sigma + 1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_one_choice_per_row(self, seed):
        rng = np.random.default_rng(seed)
        p = random_load_assignment(int(rng.integers(2, 60)), rng)
        q = round_assignment(p, int(rng.integers(0, 2**31)))
        assert q.row_sums().tolist() == [1] * p.n_rows
        assert p.max_load() <= math.log2(p.tree.n) + 1e-12

    def test_expected_load_preserved(self):
        rng = np.random.default_rng(2)
        p = random_load_assignment(32, rng)
        samples = 4000
        total = np.zeros(p.n_edges)
        for s in range(samples):
            total += round_assignment(p, s).edge_loads()
        mean = total / samples
        lengths = np.diff(p.pair_ptr)
        owner = np.repeat(np.arange(len(p.probs)), lengths)
        var = np.zeros(p.n_edges)
        # rows are independent; within a row the indicator of edge e is Bernoulli
        for r in range(p.n_rows):
            lo, hi = p.row_ptr[r], p.row_ptr[r + 1]
            mass = np.zeros(p.n_edges)
            for idx in range(lo, hi):
                mass[p.pair_edges[p.pair_ptr[idx]:p.pair_ptr[idx + 1]]] += p.probs[idx]
            var += mass * (1 - mass)
        assert owner.shape == p.pair_edges.shape
        sigma = np.sqrt(var / samples)
        assert np.all(np.abs(mean - p.edge_loads()) <= 3 * sigma + 1e-9)


def five_row_instance() -> LoadAssignment:
    tree = Tree(6, [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)])
    rows = [
        [(0, 1.0)],
        [(0, 0.3), (1, 0.7)],
        [(0, 0.2), (1, 0.5), (2, 0.3)],
        [(1, 0.6), (3, 0.4)],
        [(0, 0.1), (2, 0.25), (3, 0.25), (4, 0.4)],
    ]
    return assignment_from_rows(tree, [0, 1, 2, 3, 4, 5], rows)
