"""Tree splitting, connective subgraph lists and randomized rounding of pair assignments.

These are the combinatorial facts that justify charging the Steiner forest
algorithm against a path-based integer program.  Each construction comes with
an independent verifier.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels
from .errors import InstanceError, SizeError
from .graphs import UnionFind
from .seeding import trial_seed

BASE_CASE_SIZE = 4
ROW_SUM_TOL = 1e-12


class Tree:
    """Rooted tree on vertices ``0..n-1``.

    ``edges`` are ``(u, v)`` pairs; edge ids are positions in that tuple.
    """

    def __init__(self, n: int, edges, root: int = 0):
        self.n = int(n)
        self.edges = tuple((int(u), int(v)) for u, v in edges)
        if self.n < 1:
            raise InstanceError("tree needs at least one vertex")
        if len(self.edges) != self.n - 1:
            raise InstanceError(f"a tree on {self.n} vertices has {self.n - 1} edges, got {len(self.edges)}")
        self.adj = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise InstanceError(f"bad tree edge {e}: ({u},{v})")
            self.adj[u].append((v, e))
            self.adj[v].append((u, e))
        self.root = int(root)
        self.parent = [-1] * self.n
        self.parent_edge = [-1] * self.n
        self.depth = [0] * self.n
        self.order = []
        seen = [False] * self.n
        seen[self.root] = True
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            self.order.append(u)
            for v, e in sorted(self.adj[u]):
                if not seen[v]:
                    seen[v] = True
                    self.parent[v] = u
                    self.parent_edge[v] = e
                    self.depth[v] = self.depth[u] + 1
                    queue.append(v)
        if len(self.order) != self.n:
            raise InstanceError("tree edges do not connect every vertex")

    def children(self, u):
        return sorted(v for v, _ in self.adj[u] if self.parent[v] == u)

    def subtree_sizes(self):
        size = [1] * self.n
        for u in reversed(self.order):
            if self.parent[u] >= 0:
                size[self.parent[u]] += size[u]
        return size

    def path_edges(self, a: int, b: int) -> list[int]:
        """Edge ids on the unique a-b path."""
        out_a, out_b = [], []
        while self.depth[a] > self.depth[b]:
            out_a.append(self.parent_edge[a])
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            out_b.append(self.parent_edge[b])
            b = self.parent[b]
        while a != b:
            out_a.append(self.parent_edge[a])
            out_b.append(self.parent_edge[b])
            a, b = self.parent[a], self.parent[b]
        return out_a + out_b[::-1]


def random_tree(n: int, rng: np.random.Generator) -> Tree:
    """Uniform random labelled tree from a random Pruefer sequence."""
    if n == 1:
        return Tree(1, [])
    if n == 2:
        return Tree(2, [(0, 1)])
    seq = rng.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return Tree(n, edges)


# ---------------------------------------------------------------------------
# splitting a tree into two edge-disjoint subtrees


@dataclass
class TreeSplit:
    pivot: int
    V1: frozenset
    E1: frozenset
    V2: frozenset
    E2: frozenset

    def sizes(self):
        return len(self.V1), len(self.V2)


def split_tree(tree: Tree, threshold: int | None = None) -> TreeSplit:
    """Split into two edge-disjoint subtrees sharing exactly one vertex.

    The pivot is the deepest vertex whose subtree holds at least
    ``threshold = ceil(n/3)`` vertices (smallest id among equals).  Child
    subtrees of the pivot, largest first, move to the second part until it
    reaches the threshold; everything else stays in the first.
    """
    n = tree.n
    if n < 3:
        raise SizeError(f"tree split needs at least 3 vertices, got {n}")
    t = threshold if threshold is not None else -(-n // 3)
    size = tree.subtree_sizes()
    pivot = min((v for v in range(n) if size[v] >= t), key=lambda v: (-tree.depth[v], v))
    kids = sorted(tree.children(pivot), key=lambda c: (-size[c], c))
    moved = []
    total = 1
    for c in kids:
        if total >= t:
            break
        moved.append(c)
        total += size[c]
    V2 = {pivot}
    E2 = set()
    stack = list(moved)
    for c in moved:
        E2.add(tree.parent_edge[c])
    while stack:
        u = stack.pop()
        V2.add(u)
        for w in tree.children(u):
            E2.add(tree.parent_edge[w])
            stack.append(w)
    V1 = (set(range(n)) - V2) | {pivot}
    E1 = set(range(len(tree.edges))) - E2
    return TreeSplit(pivot, frozenset(V1), frozenset(E1), frozenset(V2), frozenset(E2))


def _is_tree(vertices, edge_ids, edges) -> bool:
    if len(edge_ids) != len(vertices) - 1:
        return False
    uf = UnionFind(vertices)
    for e in edge_ids:
        u, v = edges[e]
        if u not in vertices or v not in vertices:
            return False
        if not uf.union(u, v):
            return False
    return True


def check_split(tree: Tree, split: TreeSplit) -> list[str]:
    """Invariant violations of a split (empty list when valid)."""
    problems = []
    n = tree.n
    if len(split.V1 & split.V2) != 1:
        problems.append(f"parts share {len(split.V1 & split.V2)} vertices")
    if split.E1 & split.E2:
        problems.append("edge sets overlap")
    if split.E1 | split.E2 != set(range(len(tree.edges))):
        problems.append("edge sets do not cover the tree")
    if split.V1 | split.V2 != set(range(n)):
        problems.append("vertex sets do not cover the tree")
    cap = -(-2 * n // 3) + 1
    if max(len(split.V1), len(split.V2)) > cap:
        problems.append(f"part of size {max(split.sizes())} exceeds {cap}")
    for name, V, E in (("T1", split.V1, split.E1), ("T2", split.V2, split.E2)):
        if not _is_tree(V, E, tree.edges):
            problems.append(f"{name} is not a tree")
    return problems


# ---------------------------------------------------------------------------
# connective subgraph lists


@dataclass
class ConnectiveList:
    Q: list  # one frozenset of forest edge ids per demand
    n: int
    max_multiplicity: int = 0

    def multiplicity(self, n_edges) -> np.ndarray:
        count = np.zeros(n_edges, dtype=np.int64)
        for q in self.Q:
            for e in q:
                count[e] += 1
        return count


def multiplicity_bound(n: int) -> float:
    return 3.0 * math.log2(n) if n > 1 else 0.0


def _sub_tree(tree: Tree, V, E):
    """Relabelled copy of an induced subtree; returns (subtree, local->global vertex, local->global edge)."""
    verts = sorted(V)
    local = {v: i for i, v in enumerate(verts)}
    eids = sorted(E)
    edges = [(local[tree.edges[e][0]], local[tree.edges[e][1]]) for e in eids]
    return Tree(len(verts), edges), verts, eids


def _connective_tree(tree: Tree, pairs) -> list[set]:
    """Edge sets (local ids) for ``pairs`` on a single tree."""
    out = [set() for _ in pairs]
    uf = UnionFind(range(tree.n))
    live = []
    for idx, (s, t) in enumerate(pairs):
        if s == t or uf.connected(s, t):
            continue
        uf.union(s, t)
        live.append(idx)
    if not live:
        return out
    if tree.n <= BASE_CASE_SIZE:
        for idx in live:
            out[idx] = set(tree.path_edges(*pairs[idx]))
        return out

    split = split_tree(tree)
    only1 = split.V1 - split.V2
    only2 = split.V2 - split.V1
    L1, L2 = [], []  # (global pair, owner index)
    first = None
    for idx in live:
        s, t = pairs[idx]
        if s in split.V1 and t in split.V1:
            L1.append(((s, t), idx))
        elif s in split.V2 and t in split.V2:
            L2.append(((s, t), idx))
        else:
            if s in only2:
                s, t = t, s
            assert s in only1 and t in only2
            if first is None:
                first = (s, t)
                out[idx] = set(tree.path_edges(s, t))
            else:
                L1.append(((s, first[0]), idx))
                L2.append(((t, first[1]), idx))

    for V, E, L in ((split.V1, split.E1, L1), (split.V2, split.E2, L2)):
        if not L:
            continue
        sub, verts, eids = _sub_tree(tree, V, E)
        local = {v: i for i, v in enumerate(verts)}
        res = _connective_tree(sub, [(local[s], local[t]) for (s, t), _ in L])
        for (_, owner), q in zip(L, res):
            out[owner].update(eids[e] for e in q)
    return out


def forest_components(n: int, edges):
    """Split a forest into trees: list of (vertices, edge ids)."""
    uf = UnionFind(range(n))
    for u, v in edges:
        if not uf.union(u, v):
            raise InstanceError("edge set contains a cycle")
    groups = {}
    for v in range(n):
        groups.setdefault(uf.find(v), [[], []])[0].append(v)
    for e, (u, _) in enumerate(edges):
        groups[uf.find(u)][1].append(e)
    return [(tuple(vs), tuple(es)) for _, (vs, es) in sorted(groups.items())]


def build_connective(n: int, forest_edges, demands) -> ConnectiveList:
    """One edge subset of the forest per demand, built by recursive tree splitting.

    ``forest_edges`` are ``(u, v)`` pairs; returned sets hold their indices.
    """
    forest_edges = [(int(u), int(v)) for u, v in forest_edges]
    demands = [(int(s), int(t)) for s, t in demands]
    comps = forest_components(n, forest_edges)
    comp_of = {}
    for c, (vs, _) in enumerate(comps):
        for v in vs:
            comp_of[v] = c
    per_comp = {}
    for i, (s, t) in enumerate(demands):
        if not (0 <= s < n and 0 <= t < n):
            raise InstanceError(f"demand {i} ({s},{t}) references a missing vertex")
        if comp_of[s] != comp_of[t]:
            raise InstanceError(f"demand {i} ({s},{t}) is not connected in the forest")
        per_comp.setdefault(comp_of[s], []).append(i)
    Q = [frozenset() for _ in demands]
    for c, idxs in per_comp.items():
        vs, es = comps[c]
        local = {v: k for k, v in enumerate(vs)}
        sub = Tree(len(vs), [(local[forest_edges[e][0]], local[forest_edges[e][1]]) for e in es])
        res = _connective_tree(sub, [(local[demands[i][0]], local[demands[i][1]]) for i in idxs])
        for i, q in zip(idxs, res):
            Q[i] = frozenset(es[e] for e in q)
    out = ConnectiveList(Q, n)
    mult = out.multiplicity(len(forest_edges))
    out.max_multiplicity = int(mult.max()) if len(forest_edges) else 0
    return out


@dataclass
class ConnectiveReport:
    ok: bool
    max_multiplicity: int
    bound: float
    problems: list = field(default_factory=list)
    cut_checked: bool = False


LITERAL_CUT_MAX_N = 12


def _separated(n, forest_edges, removed, a, b) -> bool:
    if a in removed or b in removed:
        return True
    uf = UnionFind(range(n))
    for u, v in forest_edges:
        if u not in removed and v not in removed:
            uf.union(u, v)
    return not uf.connected(a, b)


def verify_connective(Q, n: int, forest_edges, demands, literal_cut_max_n: int = LITERAL_CUT_MAX_N) -> ConnectiveReport:
    """Check prefix-union connectivity and the multiplicity bound; on tiny forests also the vertex-cut definition.

    The vertex-cut reading: for every vertex set C avoiding s_i, t_i and the
    vertices of Q_i whose removal separates s_i from t_i, some earlier demand
    must be separated by C as well (a removed endpoint counts as separated).
    """
    forest_edges = [(int(u), int(v)) for u, v in forest_edges]
    Q = [frozenset(q) for q in (Q.Q if isinstance(Q, ConnectiveList) else Q)]
    problems = []
    if len(Q) != len(demands):
        problems.append(f"{len(Q)} subsets for {len(demands)} demands")
        return ConnectiveReport(False, 0, multiplicity_bound(n), problems)
    count = np.zeros(len(forest_edges), dtype=np.int64)
    uf = UnionFind(range(n))
    for i, ((s, t), q) in enumerate(zip(demands, Q)):
        for e in q:
            if not 0 <= e < len(forest_edges):
                problems.append(f"Q_{i} references unknown edge {e}")
                continue
            count[e] += 1
            uf.union(*forest_edges[e])
        if not uf.connected(s, t):
            problems.append(f"demand {i} ({s},{t}) not connected by Q_1..Q_{i}")
    bound = multiplicity_bound(n)
    worst = int(count.max()) if len(count) else 0
    if worst > bound:
        e = int(np.argmax(count))
        problems.append(f"edge {e} used {worst} times > {bound:.4g}")
    cut_checked = False
    if n <= literal_cut_max_n and not problems:
        cut_checked = True
        for i, (s, t) in enumerate(demands):
            touched = {s, t}
            for e in Q[i]:
                touched.update(forest_edges[e])
            free = [v for v in range(n) if v not in touched]
            for r in range(1, len(free) + 1):
                for C in combinations(free, r):
                    C = set(C)
                    if not _separated(n, forest_edges, C, s, t):
                        continue
                    if not any(_separated(n, forest_edges, C, a, b) for a, b in demands[:i]):
                        problems.append(f"cut {sorted(C)} separates demand {i} but no earlier demand")
                        break
                else:
                    continue
                break
    return ConnectiveReport(not problems, worst, bound, problems, cut_checked)


def random_connective_instance(rng: np.random.Generator, max_n: int = 64, max_demands: int = 20):
    n = int(rng.integers(2, max_n + 1))
    tree = random_tree(n, rng)
    k = int(rng.integers(1, max_demands + 1))
    demands = []
    for _ in range(k):
        s, t = rng.choice(n, size=2, replace=False).tolist()
        demands.append((int(s), int(t)))
    return n, list(tree.edges), demands


# ---------------------------------------------------------------------------
# randomized rounding of pair assignments


@dataclass
class LoadAssignment:
    """Probabilities over earlier vertices for every vertex after the first, in order ``order``.

    Row ``r`` belongs to vertex ``order[r + 1]``; its entries ``cols[row_ptr[r]:row_ptr[r+1]]``
    are positions (in ``order``) smaller than ``r + 1`` with probabilities ``probs``.
    The family member of an entry is the tree path between the two vertices.
    """

    tree: Tree
    order: np.ndarray
    row_ptr: np.ndarray
    cols: np.ndarray
    probs: np.ndarray
    pair_ptr: np.ndarray = None
    pair_edges: np.ndarray = None

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        n = self.tree.n
        if sorted(self.order.tolist()) != list(range(n)):
            raise InstanceError("order must be a permutation of the tree vertices")
        if len(self.row_ptr) != n or self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.cols):
            raise InstanceError("row pointer does not match the entry arrays")
        if len(self.probs) != len(self.cols):
            raise InstanceError("probabilities and columns differ in length")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise InstanceError("probabilities must lie in [0, 1]")
        for r in range(n - 1):
            lo, hi = self.row_ptr[r], self.row_ptr[r + 1]
            if hi <= lo:
                raise InstanceError(f"row {r} is empty")
            if np.any(self.cols[lo:hi] < 0) or np.any(self.cols[lo:hi] > r):
                raise InstanceError(f"row {r} points at a later vertex")
            total = math.fsum(self.probs[lo:hi].tolist())
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise InstanceError(f"row {r} sums to {total!r}, not 1")
        if self.pair_ptr is None:
            ptr = [0]
            flat = []
            for r in range(n - 1):
                a = int(self.order[r + 1])
                for idx in range(self.row_ptr[r], self.row_ptr[r + 1]):
                    flat.extend(self.tree.path_edges(a, int(self.order[self.cols[idx]])))
                    ptr.append(len(flat))
            self.pair_ptr = np.asarray(ptr, dtype=np.int64)
            self.pair_edges = np.asarray(flat, dtype=np.int64)

    @property
    def n_rows(self):
        return self.tree.n - 1

    @property
    def n_edges(self):
        return len(self.tree.edges)

    def edge_loads(self) -> np.ndarray:
        lengths = np.diff(self.pair_ptr)
        return np.bincount(self.pair_edges, weights=np.repeat(self.probs, lengths), minlength=self.n_edges)

    def max_load(self) -> float:
        return float(self.edge_loads().max()) if self.n_edges else 0.0

    def cdf(self) -> np.ndarray:
        out = np.empty_like(self.probs)
        for r in range(self.n_rows):
            lo, hi = self.row_ptr[r], self.row_ptr[r + 1]
            out[lo:hi] = np.cumsum(self.probs[lo:hi])
            out[hi - 1] = 1.0
        return out


@dataclass
class RoundedAssignment:
    assignment: LoadAssignment = field(repr=False)
    chosen: np.ndarray  # entry index per row

    def q_matrix(self) -> np.ndarray:
        """Dense 0/1 vector over entries."""
        q = np.zeros(len(self.assignment.cols), dtype=np.int64)
        q[self.chosen] = 1
        return q

    def row_sums(self) -> np.ndarray:
        q = self.q_matrix()
        return np.add.reduceat(q, self.assignment.row_ptr[:-1]) if len(q) else q

    def edge_loads(self) -> np.ndarray:
        a = self.assignment
        return _kernels.edge_loads(self.chosen, a.pair_ptr, a.pair_edges, a.n_edges)

    def max_load(self) -> int:
        loads = self.edge_loads()
        return int(loads.max()) if len(loads) else 0


def round_assignment(p: LoadAssignment, seed=None, draws=None, cdf=None) -> RoundedAssignment:
    """Pick one entry per row by inverse-CDF sampling.

    For a draw r in (0, 1] the entry picked is the first whose cumulative
    probability reaches r.  ``draws`` overrides the random numbers.
    """
    if draws is None:
        rng = np.random.default_rng(seed)
        draws = 1.0 - rng.random(p.n_rows)
    draws = np.asarray(draws, dtype=np.float64)
    if draws.shape != (p.n_rows,):
        raise InstanceError(f"expected {p.n_rows} draws, got shape {draws.shape}")
    if cdf is None:
        cdf = p.cdf()
    chosen = _kernels.sample_rows(p.row_ptr, cdf, draws)
    return RoundedAssignment(p, chosen)


def assignment_from_rows(tree: Tree, order, rows) -> LoadAssignment:
    """Build from ``rows[r] = [(earlier position, probability), ...]``."""
    ptr = [0]
    cols, probs = [], []
    for row in rows:
        for j, pr in row:
            cols.append(j)
            probs.append(pr)
        ptr.append(len(cols))
    return LoadAssignment(tree, order, ptr, cols, probs)


def random_load_assignment(n: int, rng: np.random.Generator, max_ancestors: int = 3, max_tries: int = 50) -> LoadAssignment:
    """Random tree with a breadth-first order and mass on nearby ancestors, resampled until L_p <= log2 n."""
    cap = math.log2(n)
    concentration = 1.0
    for _ in range(max_tries):
        tree = random_tree(n, rng)
        order = list(tree.order)
        pos = {v: i for i, v in enumerate(order)}
        rows = []
        for r in range(1, n):
            v = order[r]
            anc = []
            u = tree.parent[v]
            while u >= 0 and len(anc) < max_ancestors:
                anc.append(u)
                u = tree.parent[u]
            weights = rng.dirichlet(np.full(len(anc), 1.0))
            weights[0] += concentration
            weights = weights / weights.sum()
            weights[-1] = 1.0 - math.fsum(weights[:-1].tolist())
            rows.append([(pos[a], float(w)) for a, w in zip(anc, weights)])
        p = assignment_from_rows(tree, order, rows)
        if p.max_load() <= cap:
            return p
        concentration *= 2.0
    raise InstanceError(f"could not sample an assignment with load at most {cap:.3g}")


def marginal_frequencies(p: LoadAssignment, samples: int, seed) -> np.ndarray:
    """Empirical frequency of each entry over ``samples`` independent roundings."""
    rng = np.random.default_rng(seed)
    cdf = p.cdf()
    counts = np.zeros(len(p.cols), dtype=np.int64)
    for _ in range(samples):
        draws = 1.0 - rng.random(p.n_rows)
        counts[_kernels.sample_rows(p.row_ptr, cdf, draws)] += 1
    return counts / samples


@dataclass
class RoundingTrial:
    trial: int
    seed: int
    max_load_p: float
    max_load_q: int

    @property
    def ratio(self) -> float:
        return self.max_load_q / self.max_load_p if self.max_load_p > 0 else math.inf


def rounding_trials(n: int, trials: int, seed: int) -> list[RoundingTrial]:
    out = []
    for k in range(trials):
        s = trial_seed(seed, k)
        rng = np.random.default_rng(s)
        p = random_load_assignment(n, rng)
        q = round_assignment(p, draws=1.0 - rng.random(p.n_rows))
        out.append(RoundingTrial(k, s, p.max_load(), q.max_load()))
    return out
