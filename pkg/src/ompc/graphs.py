"""Weighted graphs with degree bounds, demand streams and a union-find."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InstanceError


class UnionFind:
    def __init__(self, items=()):
        self.parent = {}
        for it in items:
            self.parent[it] = it

    def find(self, a):
        parent = self.parent
        if a not in parent:
            parent[a] = a
            return a
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # smaller root id wins so component labels are deterministic
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def connected(self, a, b) -> bool:
        return self.find(a) == self.find(b)


@dataclass(frozen=True)
class WeightedGraph:
    """Simple undirected graph on vertices ``0..n-1`` with positive weights and degree bounds."""

    n: int
    edges: tuple  # ((u, v, w), ...) with u < v
    bounds: tuple  # b_v per vertex

    def __post_init__(self):
        if self.n < 1:
            raise InstanceError("graph needs at least one vertex")
        if len(self.bounds) != self.n:
            raise InstanceError(f"expected {self.n} degree bounds, got {len(self.bounds)}")
        for v, b in enumerate(self.bounds):
            if int(b) != b or b < 1:
                raise InstanceError(f"degree bound of vertex {v} must be a positive integer, got {b}")
        seen = set()
        for idx, (u, v, w) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InstanceError(f"edge {idx} ({u},{v}) references a missing vertex")
            if u == v:
                raise InstanceError(f"edge {idx} is a self-loop at {u}")
            if not w > 0:
                raise InstanceError(f"edge {idx} ({u},{v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InstanceError(f"edge {idx} duplicates ({key[0]},{key[1]})")
            seen.add(key)

    @classmethod
    def build(cls, n: int, edges: Sequence, bounds: Sequence | int):
        if isinstance(bounds, int):
            bounds = [bounds] * n
        norm = tuple((min(int(u), int(v)), max(int(u), int(v)), float(w)) for u, v, w in edges)
        return cls(int(n), norm, tuple(int(b) for b in bounds))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weight(self, e: int) -> float:
        return self.edges[e][2]

    def endpoints(self, e: int) -> tuple[int, int]:
        u, v, _ = self.edges[e]
        return u, v

    def adjacency(self):
        adj = [[] for _ in range(self.n)]
        for e, (u, v, _) in enumerate(self.edges):
            adj[u].append((v, e))
            adj[v].append((u, e))
        return adj

    def weight_ratio(self) -> float:
        """max w / min positive w over the edges."""
        ws = [w for _, _, w in self.edges if w > 0]
        if not ws:
            return 1.0
        return max(ws) / min(ws)

    def min_weight(self) -> float:
        return min(w for _, _, w in self.edges)

    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges)

    def edge_index(self):
        return {(u, v): e for e, (u, v, _) in enumerate(self.edges)}


def check_demands(graph: WeightedGraph, demands) -> tuple:
    out = []
    for i, (s, t) in enumerate(demands):
        s, t = int(s), int(t)
        if not (0 <= s < graph.n and 0 <= t < graph.n):
            raise InstanceError(f"demand {i} ({s},{t}) references a missing vertex")
        if s == t:
            raise InstanceError(f"demand {i} has identical endpoints {s}")
        out.append((s, t))
    return tuple(out)


def degree_map(graph: WeightedGraph, edge_ids) -> dict:
    deg = {}
    for e in edge_ids:
        u, v = graph.endpoints(e)
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    return deg


def connects(graph: WeightedGraph, edge_ids, s, t, extra_pairs=()) -> bool:
    """Whether ``s`` and ``t`` are connected using ``edge_ids`` plus virtual ``extra_pairs``."""
    uf = UnionFind()
    for e in edge_ids:
        uf.union(*graph.endpoints(e))
    for a, b in extra_pairs:
        uf.union(a, b)
    return uf.connected(s, t)


def fig_ssf_instance():
    """Six-vertex unit-weight example with degree bound 3 and demands (v2,v5), (v3,v6).

    Vertex ``v_j`` is index ``j-1``.  The five edges are the union of the two
    per-demand subgraphs e(v1,v2), e(v1,v4), e(v4,v5) and e(v2,v3), e(v4,v5), e(v4,v6).
    """
    edges = [(0, 1, 1.0), (0, 3, 1.0), (3, 4, 1.0), (1, 2, 1.0), (3, 5, 1.0)]
    graph = WeightedGraph.build(6, edges, 3)
    demands = ((1, 4), (2, 5))
    return graph, demands
