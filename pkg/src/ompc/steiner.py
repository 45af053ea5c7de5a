"""Online edge-weighted degree-bounded Steiner forest on top of the packing/covering solver.

Each demand (s_i, t_i) is a covering constraint over path variables x_H^i.
A variable is satisfied when s_i and t_i are connected in H plus the virtual
zero-weight edges joining the endpoints of earlier demands.  Packing rows are
one per vertex (deg_H(v) / b_v) plus one weight row (w(H) / w_guess); every
variable sits in exactly one covering constraint, so k = 1.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_PARAMS, OnlineSolver, PackingSystem, PotentialParams
from .errors import InfeasibleError, InfeasibleStep, LoadLimitExceeded
from .graphs import UnionFind, WeightedGraph, check_demands, connects
from .oracles import exact_path_enumeration, path_delta, path_oracle


def build_packing_system(graph: WeightedGraph, w_guess: float) -> PackingSystem:
    """Packing rows for path variables ``(demand_index, real_edge_tuple)``; m = n + 1, k = 1."""
    if not w_guess > 0:
        raise ValueError(f"weight guess must be positive, got {w_guess}")

    def column(var):
        _, edges = var
        d = path_delta(graph, edges, w_guess)
        return [(i, c) for i, c in enumerate(d.tolist()) if c]

    return PackingSystem(graph.n + 1, 1, column)


class ContractionState:
    """Virtual edges e(s_j, t_j) of served demands and the components they induce."""

    def __init__(self, n: int):
        self.pairs: list[tuple[int, int]] = []
        self.uf = UnionFind(range(n))

    def add(self, s: int, t: int):
        self.pairs.append((s, t))
        self.uf.union(s, t)

    def connected(self, s: int, t: int) -> bool:
        return self.uf.connected(s, t)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class DemandConstraint:
    """Covering row of demand ``index``: some chosen path variable must connect s and t."""

    index: int
    s: int
    t: int
    graph: WeightedGraph = field(repr=False)
    virtual_pairs: tuple = ()

    support = None  # implicit: one variable per subgraph

    def satisfied_by(self, edges) -> bool:
        return connects(self.graph, edges, self.s, self.t, self.virtual_pairs)

    def coverage(self, S) -> float:
        return float(sum(1 for i, edges in S if i == self.index and self.satisfied_by(edges)))

    @property
    def already_connected(self) -> bool:
        return self.satisfied_by(())


class SteinerPathOracle:
    """Adapter from demand constraints to the path oracles.

    ``mode`` is ``"path"`` (separable-surrogate label setting) or ``"exact"``
    (exhaustive elementary-path enumeration, small graphs only).
    """

    def __init__(self, graph: WeightedGraph, budget: float, params: PotentialParams = DEFAULT_PARAMS, mode: str = "path"):
        if mode not in ("path", "exact"):
            raise ValueError(f"unknown path oracle mode {mode!r}")
        self.graph = graph
        self.budget = budget
        self.params = params
        self.mode = mode

    def __call__(self, C: DemandConstraint, solver):
        if C.already_connected:
            return ((C.index, ()),)
        fn = path_oracle if self.mode == "path" else exact_path_enumeration
        edges = fn(self.graph, C.s, C.t, C.virtual_pairs, solver.F, self.budget, self.params)
        if edges is None:
            return None
        return ((C.index, tuple(edges)),)


@dataclass
class OnlineSolution:
    """Per-demand augmentations and their IP-style accounting (reuse is paid each time)."""

    graph: WeightedGraph = field(repr=False)
    demands: list = field(default_factory=list)
    augmentations: list = field(default_factory=list)
    phase_of: list = field(default_factory=list)
    degree_count: np.ndarray = None
    weight: float = 0.0
    purchased: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.degree_count is None:
            self.degree_count = np.zeros(self.graph.n, dtype=np.int64)

    def record(self, s, t, edges, phase):
        self.demands.append((s, t))
        self.augmentations.append(tuple(edges))
        self.phase_of.append(phase)
        for e in edges:
            u, v, w = self.graph.edges[e]
            self.degree_count[u] += 1
            self.degree_count[v] += 1
            self.weight += w
            self.purchased[e] += 1

    def augmentation_weight(self, i) -> float:
        return sum(self.graph.edges[e][2] for e in self.augmentations[i])

    def degree_loads(self) -> np.ndarray:
        return self.degree_count / np.asarray(self.graph.bounds, dtype=np.float64)

    def max_degree_load(self) -> float:
        return float(self.degree_loads().max()) if self.graph.n else 0.0

    @property
    def edge_set(self) -> set:
        return set(self.purchased)

    def physical_weight(self) -> float:
        return sum(self.graph.edges[e][2] for e in self.purchased)

    def physical_degree_loads(self) -> np.ndarray:
        deg = np.zeros(self.graph.n)
        for e in self.purchased:
            u, v, _ = self.graph.edges[e]
            deg[u] += 1
            deg[v] += 1
        return deg / np.asarray(self.graph.bounds, dtype=np.float64)

    def all_connected(self) -> bool:
        """Every served demand is connected by purchased (real) edges alone."""
        uf = UnionFind(range(self.graph.n))
        for e in self.purchased:
            uf.union(*self.graph.endpoints(e))
        return all(uf.connected(s, t) for s, t in self.demands)


class SteinerEngine:
    """Serves demands one at a time against a fixed weight guess."""

    def __init__(
        self,
        graph: WeightedGraph,
        w_guess: float,
        params: PotentialParams = DEFAULT_PARAMS,
        oracle: str = "path",
        load_limit: float | None = None,
        contraction: ContractionState | None = None,
        solution: OnlineSolution | None = None,
        phase: int = 1,
        certificate=None,
    ):
        self.graph = graph
        self.w_guess = float(w_guess)
        self.params = params
        self.system = build_packing_system(graph, self.w_guess)
        self.solver = OnlineSolver(self.system, params, certificate=certificate, load_limit=load_limit)
        self.oracle = SteinerPathOracle(graph, self.w_guess, params, oracle)
        self.contraction = contraction or ContractionState(graph.n)
        self.solution = solution or OnlineSolution(graph)
        self.phase = phase

    def constraint_for(self, s, t) -> DemandConstraint:
        return DemandConstraint(len(self.contraction), s, t, self.graph, tuple(self.contraction.pairs))

    def serve(self, s: int, t: int) -> tuple:
        """Pick and commit H_i for demand (s, t); returns its real edges."""
        C = self.constraint_for(s, t)
        chosen = self.solver.arrive(C, self.oracle)
        ((_, edges),) = chosen
        self.solution.record(s, t, edges, self.phase)
        self.contraction.add(s, t)
        return edges

    def max_load(self) -> float:
        return float(self.solver.F.max())


def run_online(graph, demands, w_guess, params=DEFAULT_PARAMS, oracle="path", certificate=None):
    """Serve every demand with a known weight guess; InfeasibleStep propagates."""
    demands = check_demands(graph, demands)
    engine = SteinerEngine(graph, w_guess, params, oracle, certificate=certificate)
    for s, t in demands:
        engine.serve(s, t)
    return engine


@dataclass
class PhaseRecord:
    index: int
    guess: float
    first_demand: int
    demands_served: int = 0
    max_load: float = 0.0
    weight: float = 0.0
    max_degree_load: float = 0.0
    ended_by: str = "final"


@dataclass
class DoublingResult:
    solution: OnlineSolution
    phases: list
    threshold: float
    ratio: float
    initial_guess: float

    @property
    def phase_count(self) -> int:
        return len(self.phases)

    @property
    def final_guess(self) -> float:
        return self.phases[-1].guess

    def cumulative_phase_weight(self) -> float:
        return sum(p.weight for p in self.phases)


def doubling_threshold(graph, params=DEFAULT_PARAMS) -> float:
    """Per-phase load limit log_rho(gamma m / (gamma - 1)) with m = n + 1 rows."""
    return params.load_cap(graph.n + 1)


def run_with_doubling(graph, demands, r=2.0, params=DEFAULT_PARAMS, oracle="path", w0=None):
    """Serve demands without knowing the optimal weight.

    The guess starts at the smallest edge weight.  A phase ends when the oracle
    finds no admissible path or a commit would push some load past the
    threshold; the guess is then multiplied by ``r`` and the solver restarts
    with zero loads.  Edges bought in earlier phases stay bought and the
    virtual edges of served demands carry over.
    """
    if r < 2:
        raise ValueError(f"doubling ratio must be at least 2, got {r}")
    demands = check_demands(graph, demands)
    threshold = doubling_threshold(graph, params)
    guess = float(w0) if w0 is not None else graph.min_weight()
    contraction = ContractionState(graph.n)
    solution = OnlineSolution(graph)
    phases = []

    def start_phase(guess, first):
        phases.append(PhaseRecord(len(phases) + 1, guess, first))
        return SteinerEngine(
            graph, guess, params, oracle,
            load_limit=threshold, contraction=contraction, solution=solution, phase=len(phases),
        )

    engine = start_phase(guess, 0)
    give_up = r * graph.total_weight()
    for i, (s, t) in enumerate(demands):
        while True:
            try:
                edges = engine.serve(s, t)
            except InfeasibleStep as exc:
                if engine.w_guess > give_up:
                    raise InfeasibleError(f"demand {i} ({s},{t}) cannot be served: {exc}") from exc
                phases[-1].ended_by = "breach" if isinstance(exc, LoadLimitExceeded) else "infeasible"
                guess = engine.w_guess * r
                engine = start_phase(guess, i)
                continue
            rec = phases[-1]
            rec.demands_served += 1
            rec.max_load = engine.max_load()
            rec.weight += sum(graph.edges[e][2] for e in edges)
            rec.max_degree_load = float(engine.solver.F[: graph.n].max())
            break
    return DoublingResult(solution, phases, threshold, float(r), phases[0].guess)


def ip_load_profile(graph, augmentations, w_ref) -> np.ndarray:
    """IP packing loads of a list of augmentations: deg(v)/b_v per vertex, then total weight / w_ref."""
    out = np.zeros(graph.n + 1)
    for edges in augmentations:
        d = path_delta(graph, edges, w_ref)
        out += d
    return out


def ratio_report(solution: OnlineSolution, graph: WeightedGraph, offline_opt: float,
                 ip_alpha: float | None = None, params: PotentialParams = DEFAULT_PARAMS,
                 w_guess: float | None = None) -> dict:
    """Realised ratios of an online solution against the offline optimum weight."""
    cap = params.load_cap(graph.n + 1)
    report = {
        "n": graph.n,
        "demands": len(solution.demands),
        "w_opt": offline_opt,
        "online_weight": solution.weight,
        "weight_ratio": solution.weight / offline_opt if offline_opt > 0 else math.inf,
        "degree_violation": solution.max_degree_load(),
        "physical_weight": solution.physical_weight(),
        "physical_weight_ratio": solution.physical_weight() / offline_opt if offline_opt > 0 else math.inf,
        "physical_degree_violation": float(solution.physical_degree_loads().max()),
        "feasible": solution.all_connected(),
        "load_cap": cap,
    }
    if w_guess is not None:
        loads = ip_load_profile(graph, solution.augmentations, w_guess)
        report["w_guess"] = w_guess
        report["max_packing_load"] = float(loads.max())
    if ip_alpha is not None:
        report["ip_alpha"] = ip_alpha
        report["scaled_cap"] = cap * ip_alpha
    return report
