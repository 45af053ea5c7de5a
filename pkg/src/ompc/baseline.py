"""Exact offline optima by exhaustive search, for desk-scale instances."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from math import prod

import numpy as np

from . import _kernels
from .core import FEAS_EPS, PackingSystem
from .errors import CapacityError, InfeasibleError
from .graphs import UnionFind, WeightedGraph, check_demands, degree_map
from .oracles import path_delta, simple_paths

OMPC_VARIABLE_CAP = 22
STEINER_EDGE_CAP = 18
IPGOOD_PRODUCT_CAP = 10**6


@dataclass
class OfflineResult:
    value: float
    witness: object
    stats: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def offline_ompc_opt(system: PackingSystem, constraints, variables=None, cap=OMPC_VARIABLE_CAP) -> OfflineResult:
    """Smallest alpha with P x <= alpha and C x >= 1 over binary x."""
    constraints = list(constraints)
    if variables is None:
        names = set(system.variables())
        for C in constraints:
            names.update(C.support)
        variables = sorted(names)
    N = len(variables)
    if N > cap:
        raise CapacityError(f"{N} variables exceed brute-force cap {cap}")
    P = np.zeros((N, system.m))
    Cm = np.zeros((N, len(constraints)))
    for r, var in enumerate(variables):
        for i, c in system.column(var):
            P[r, i] = c
        for j, C in enumerate(constraints):
            Cm[r, j] = C.coeffs.get(var, 0.0)
    t0 = time.perf_counter()
    alpha = _kernels.ompc_alpha(P, Cm, FEAS_EPS)
    mask, value = _kernels.pick_min_weight(alpha)
    stats = {"assignments": 1 << N, "seconds": time.perf_counter() - t0}
    if mask < 0:
        raise InfeasibleError("no binary assignment satisfies every covering constraint")
    witness = [variables[r] for r in range(N) if (mask >> r) & 1]
    return OfflineResult(float(value), witness, stats)


def offline_steiner_opt(graph: WeightedGraph, demands, cap=STEINER_EDGE_CAP) -> OfflineResult:
    """Minimum-weight edge set connecting all demands within the degree bounds."""
    demands = check_demands(graph, demands)
    if graph.n_edges > cap:
        raise CapacityError(f"{graph.n_edges} edges exceed brute-force cap {cap}")
    eu = [u for u, _, _ in graph.edges]
    ev = [v for _, v, _ in graph.edges]
    w = [x for _, _, x in graph.edges]
    ds = [s for s, _ in demands]
    dt = [t for _, t in demands]
    t0 = time.perf_counter()
    weights = _kernels.steiner_weights(eu, ev, w, graph.bounds, ds, dt, graph.n)
    mask, value = _kernels.pick_min_weight(weights)
    stats = {"subsets": 1 << graph.n_edges, "seconds": time.perf_counter() - t0}
    if mask < 0:
        raise InfeasibleError("no degree-feasible subgraph connects every demand")
    witness = [e for e in range(graph.n_edges) if (mask >> e) & 1]
    return OfflineResult(float(value), witness, stats)


def check_steiner_witness(graph, demands, edges) -> bool:
    deg = degree_map(graph, edges)
    if any(deg[v] > graph.bounds[v] for v in deg):
        return False
    uf = UnionFind(range(graph.n))
    for e in edges:
        uf.union(*graph.endpoints(e))
    return all(uf.connected(s, t) for s, t in demands)


def ipgood_candidates(graph, demands):
    """Per demand, the distinct real-edge sets of elementary paths in G plus earlier virtual edges.

    Loads only grow with extra edges, so minimal connecting subgraphs (paths)
    are enough to find the optimum.
    """
    out = []
    for i, (s, t) in enumerate(demands):
        virtual = demands[:i]
        seen = set()
        for path in simple_paths(graph, s, t, virtual, float("inf")):
            seen.add(tuple(sorted(e for e in path if e >= 0)))
        out.append(sorted(seen, key=lambda es: (len(es), es)))
    return out


def offline_ipgood_opt(graph, demands, w_opt, cap=IPGOOD_PRODUCT_CAP) -> OfflineResult:
    """Optimal alpha of the per-demand path formulation, by depth-first search with pruning."""
    demands = check_demands(graph, demands)
    cands = ipgood_candidates(graph, demands)
    size = prod(len(c) for c in cands)
    if size > cap:
        raise CapacityError(f"path-choice product {size} exceeds cap {cap}")
    if any(not c for c in cands):
        raise InfeasibleError("some demand has no connecting path")
    deltas = [[path_delta(graph, es, w_opt) for es in c] for c in cands]
    best = [np.inf, None]
    visited = [0]
    t0 = time.perf_counter()

    def dfs(i, load, chosen):
        visited[0] += 1
        if i == len(cands):
            alpha = float(load.max())
            if alpha < best[0] - 1e-12:
                best[0], best[1] = alpha, list(chosen)
            return
        for es, d in zip(cands[i], deltas[i]):
            nxt = load + d
            if nxt.max() >= best[0] - 1e-12:
                continue
            chosen.append(es)
            dfs(i + 1, nxt, chosen)
            chosen.pop()

    dfs(0, np.zeros(graph.n + 1), [])
    stats = {"product": size, "nodes": visited[0], "seconds": time.perf_counter() - t0}
    return OfflineResult(float(best[0]), [list(es) for es in best[1]], stats)


def sf_witness_alpha(graph, edges, w_opt) -> float:
    """Alpha of a Steiner forest used as a single subgraph: max(max deg/b, w/w_opt)."""
    d = path_delta(graph, edges, w_opt)
    return float(d.max())


def instance_key(kind: str, payload) -> str:
    blob = json.dumps({"kind": kind, "payload": payload}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cached(cache_dir, kind, payload, compute):
    """Return ``compute()`` as JSON, memoised on disk under the hash of ``payload``."""
    if not cache_dir:
        return compute()
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"{kind}-{instance_key(kind, payload)[:24]}.json")
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    result = compute()
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(result, fh, sort_keys=True)
    os.replace(tmp, path)
    return result
