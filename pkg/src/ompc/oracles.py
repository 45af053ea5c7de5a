"""Set-selection oracles: the argmin step of the online solver for specific families.

Generic explicit constraints are served by exhaustive enumeration (small
supports) or an exact depth-first search that prunes with the monotonicity of
the cost.  Steiner demands are served by path oracles on the graph augmented
with zero-weight virtual edges between the endpoints of earlier demands.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from . import _kernels
from .core import FEAS_EPS, TIE_REL, tau_from_delta
from .errors import OracleCapacityError

ENUMERATION_CAP = 20
PATH_ENUMERATION_CAP = 15


def _support_matrix(C, solver):
    support = C.support
    sys = solver.system
    D = np.zeros((len(support), sys.m))
    for t, var in enumerate(support):
        for i, c in sys.column(var):
            D[t, i] += c / sys.k
    cover = np.array([C.coeffs[var] for var in support], dtype=np.float64)
    return support, D, cover


class ExactEnumerationOracle:
    """Global argmin over every subset of the constraint's support.

    Ties (relative 1e-12) go to the lexicographically smallest sorted id tuple.
    """

    def __init__(self, cap: int = ENUMERATION_CAP):
        self.cap = cap

    def __call__(self, C, solver):
        support = C.support
        if len(support) > self.cap:
            raise OracleCapacityError(f"support of size {len(support)} exceeds enumeration cap {self.cap}")
        support, D, cover = _support_matrix(C, solver)
        mask, _ = _kernels.subset_argmin(D, cover, solver.F, solver.params.log_rho, FEAS_EPS, TIE_REL)
        if mask < 0:
            return None
        return tuple(var for t, var in enumerate(support) if (mask >> t) & 1)


def exact_enumeration_oracle(C, solver, cap: int = ENUMERATION_CAP):
    return ExactEnumerationOracle(cap)(C, solver)


class BranchAndBoundOracle:
    """Exact argmin by depth-first search over the sorted support.

    Include-first DFS visits subsets in lexicographic order of their sorted id
    tuples, and adding a variable never lowers the cost, so any partial set
    costing at least the incumbent can be cut.  The result equals the one from
    exhaustive enumeration, without its 2**s blow-up when singletons cover.
    """

    def __init__(self, node_limit: int = 2_000_000):
        self.node_limit = node_limit
        self.nodes = 0

    def __call__(self, C, solver):
        support, D, cover = _support_matrix(C, solver)
        s = len(support)
        log_rho = solver.params.log_rho
        base = np.exp(solver.F * log_rho)
        suffix = np.concatenate([np.cumsum(cover[::-1])[::-1], [0.0]])
        best = [math.inf, None]
        self.nodes = 0

        def cost(acc):
            total = 0.0
            for i in range(acc.shape[0]):
                if acc[i]:
                    total += base[i] * math.expm1(acc[i] * log_rho)
            return total

        def dfs(start, chosen, acc, covered):
            for t in range(start, s):
                self.nodes += 1
                if self.nodes > self.node_limit:
                    raise OracleCapacityError(f"search exceeded {self.node_limit} nodes")
                new_acc = acc + D[t]
                if np.any(new_acc > 1.0 + FEAS_EPS):
                    continue
                tau = cost(new_acc)
                if best[1] is not None and tau >= best[0] - TIE_REL * max(1.0, abs(best[0])):
                    continue
                new_cov = covered + cover[t]
                chosen.append(t)
                if new_cov >= 1.0 - FEAS_EPS:
                    # strictly better than the incumbent, which precedes it lexicographically
                    best[0], best[1] = tau, tuple(chosen)
                elif new_cov + suffix[t + 1] >= 1.0 - FEAS_EPS:
                    dfs(t + 1, chosen, new_acc, new_cov)
                chosen.pop()

        dfs(0, [], np.zeros(solver.m), 0.0)
        if best[1] is None:
            return None
        return tuple(support[t] for t in best[1])


# ---------------------------------------------------------------------------
# paths in a graph with virtual edges


def path_delta(graph, real_edges, budget, k=1):
    """Row increments of a path variable: deg(v) / (k b_v) per vertex, w(H) / (k budget) last."""
    d = np.zeros(graph.n + 1)
    weight = 0.0
    for e in sorted(real_edges):
        u, v, w = graph.edges[e]
        d[u] += 1.0
        d[v] += 1.0
        weight += w
    for v in range(graph.n):
        if d[v]:
            d[v] = d[v] / graph.bounds[v] / k
    d[graph.n] = weight / budget / k
    return d


def marginal_costs(graph, F, budget, params, k=1) -> np.ndarray:
    """Separable per-edge surrogate: sum over touched rows of rho**F_r * (rho**delta_r(e) - 1)."""
    log_rho = params.log_rho
    base = np.exp(np.asarray(F, dtype=np.float64) * log_rho)
    out = np.zeros(graph.n_edges)
    for e, (u, v, w) in enumerate(graph.edges):
        out[e] = (
            base[u] * math.expm1(log_rho / (k * graph.bounds[u]))
            + base[v] * math.expm1(log_rho / (k * graph.bounds[v]))
            + base[graph.n] * math.expm1(w / (k * budget) * log_rho)
        )
    return out


def _routing_adjacency(graph, virtual_pairs, budget):
    # real edge ids are >= 0, virtual edge j is encoded as -(j + 1)
    adj = [[] for _ in range(graph.n)]
    for e, (u, v, w) in enumerate(graph.edges):
        if w <= budget * (1 + FEAS_EPS):
            adj[u].append((v, e))
            adj[v].append((u, e))
    for j, (a, b) in enumerate(virtual_pairs):
        if a != b:
            adj[a].append((b, -(j + 1)))
            adj[b].append((a, -(j + 1)))
    return adj


def _interior_ok(graph, vertex, k):
    # two real path edges at an interior vertex add 2 / (k b_v) to its row
    return 2.0 <= k * graph.bounds[vertex] + FEAS_EPS


def path_oracle(graph, s, t, virtual_pairs, F, budget, params, k=1):
    """Elementary s-t path minimising the separable surrogate within the weight budget.

    Exact label setting over (cost, weight, visited set, last-edge-real) with
    dominance pruning.  Returns the sorted tuple of real edges, ``()`` when the
    virtual edges alone connect s and t, or None when no admissible path exists.
    """
    if s == t:
        return ()
    costs = marginal_costs(graph, F, budget, params, k)
    adj = _routing_adjacency(graph, virtual_pairs, budget)
    limit = budget * (1 + FEAS_EPS)
    # label: (cost, weight, vertex, visited, last_real, parent, edge)
    labels = []
    frontier = [[] for _ in range(graph.n)]
    dead = set()
    heap = []

    def push(cost, weight, vertex, visited, last_real, parent, edge):
        for idx in frontier[vertex]:
            if idx in dead:
                continue
            c2, w2, _, vis2, lr2, _, _ = labels[idx]
            if c2 <= cost and w2 <= weight and (vis2 & ~visited) == 0 and (not lr2 or last_real):
                return
        for idx in frontier[vertex]:
            if idx in dead:
                continue
            c2, w2, _, vis2, lr2, _, _ = labels[idx]
            if cost <= c2 and weight <= w2 and (visited & ~vis2) == 0 and (not last_real or lr2):
                dead.add(idx)
        labels.append((cost, weight, vertex, visited, last_real, parent, edge))
        idx = len(labels) - 1
        frontier[vertex].append(idx)
        heapq.heappush(heap, (cost, weight, idx))

    push(0.0, 0.0, s, 1 << s, False, -1, None)
    while heap:
        _, _, idx = heapq.heappop(heap)
        if idx in dead:
            continue
        cost, weight, vertex, visited, last_real, _, _ = labels[idx]
        if vertex == t:
            edges = []
            while labels[idx][5] >= 0:
                e = labels[idx][6]
                if e >= 0:
                    edges.append(e)
                idx = labels[idx][5]
            return tuple(sorted(edges))
        for nxt, e in adj[vertex]:
            if (visited >> nxt) & 1:
                continue
            real = e >= 0
            if real:
                w_new = weight + graph.edges[e][2]
                if w_new > limit:
                    continue
                if last_real and vertex != s and not _interior_ok(graph, vertex, k):
                    continue
                push(cost + costs[e], w_new, nxt, visited | (1 << nxt), True, idx, e)
            else:
                push(cost, weight, nxt, visited | (1 << nxt), False, idx, e)
    return None


def simple_paths(graph, s, t, virtual_pairs, budget):
    """Yield every elementary s-t path as a tuple of edge ids (virtual ones negative)."""
    adj = _routing_adjacency(graph, virtual_pairs, budget)
    path = []
    on_path = {s}

    def dfs(v):
        if v == t:
            yield tuple(path)
            return
        for nxt, e in adj[v]:
            if nxt in on_path:
                continue
            on_path.add(nxt)
            path.append(e)
            yield from dfs(nxt)
            path.pop()
            on_path.discard(nxt)

    yield from dfs(s)


def path_admissible(graph, real_edges, budget, k=1):
    d = path_delta(graph, real_edges, budget, k)
    return bool(np.all(d <= 1.0 + FEAS_EPS))


def exact_path_enumeration(graph, s, t, virtual_pairs, F, budget, params, k=1, cap=PATH_ENUMERATION_CAP):
    """True argmin of the exponential cost over all admissible elementary s-t paths."""
    if graph.n > cap:
        raise OracleCapacityError(f"{graph.n} vertices exceed path enumeration cap {cap}")
    if s == t:
        return ()
    F = np.asarray(F, dtype=np.float64)
    best = None
    for path in simple_paths(graph, s, t, virtual_pairs, budget):
        real = tuple(sorted(e for e in path if e >= 0))
        d = path_delta(graph, real, budget, k)
        if np.any(d > 1.0 + FEAS_EPS):
            continue
        cost = tau_from_delta(F, d, params.log_rho)
        key = (cost, real)
        if best is None:
            best = key
            continue
        tol = TIE_REL * max(1.0, abs(best[0]))
        if cost < best[0] - tol or (cost <= best[0] + tol and real < best[1]):
            best = key
    return None if best is None else best[1]


def path_tau(graph, real_edges, F, budget, params, k=1) -> float:
    d = path_delta(graph, real_edges, budget, k)
    return tau_from_delta(np.asarray(F, dtype=np.float64), d, params.log_rho)
