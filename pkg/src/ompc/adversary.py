"""Randomized lower-bound instances on a complete binary tree.

Each of the ``2m - 2`` tree edges owns ``d`` variables and each of the ``m``
leaves owns a packing row over all variables on its root path.  A random leaf
is picked; at every internal node on its root path the adversary offers
``log2 d`` covering constraints over the still-active variables of the two
child edges, halving each side at random after every offer.  One surviving
variable on the off-path child edge of every path node covers everything at
packing value 1, while an online algorithm pays for variables the adversary
later discards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_PARAMS, CoveringConstraint, OnlineSolver, PackingSystem, PlantedCertificate, PotentialParams
from .errors import InstanceError, StreamEnd
from .oracles import BranchAndBoundOracle
from .seeding import trial_seed


def _log2_exact(x: int, name: str) -> int:
    x = int(x)
    if x < 2 or x & (x - 1):
        raise InstanceError(f"{name} must be a power of two and at least 2, got {x}")
    return x.bit_length() - 1


@dataclass(frozen=True)
class AdversaryInstance:
    """Heap-indexed tree: nodes 1..2m-1, node c > 1 owns the edge to its parent c // 2.

    Variable ``(c - 2) * d + t`` is the ``t``-th variable of edge ``c``; packing
    row ``leaf - m`` belongs to leaf ``leaf`` in ``m..2m-1``.
    """

    m: int
    d: int

    @property
    def depth(self) -> int:
        return self.m.bit_length() - 1

    @property
    def k(self) -> int:
        return self.d.bit_length() - 1

    @property
    def n_edges(self) -> int:
        return 2 * self.m - 2

    @property
    def n_variables(self) -> int:
        return self.n_edges * self.d

    def edge_variables(self, c: int) -> list[int]:
        return [(c - 2) * self.d + t for t in range(self.d)]

    def edge_of(self, var: int) -> int:
        return var // self.d + 2

    def leaves_below(self, c: int) -> range:
        h = self.depth - (c.bit_length() - 1)
        return range(c << h, (c + 1) << h)

    def column(self, var: int):
        if not 0 <= var < self.n_variables:
            return None
        return [(leaf - self.m, 1.0) for leaf in self.leaves_below(self.edge_of(var))]

    def packing_system(self) -> PackingSystem:
        return PackingSystem(self.m, self.k, self.column)

    def path_variables(self, leaf: int) -> list[int]:
        """Variables on the root-to-leaf path (the support of that leaf's packing row)."""
        out = []
        c = leaf
        while c > 1:
            out.extend(self.edge_variables(c))
            c //= 2
        return sorted(out)


@dataclass
class AdversaryRun:
    instance: AdversaryInstance
    seed: int
    leaf: int
    path_nodes: list
    constraints: list
    survivors: dict  # path node -> (left survivor, right survivor)
    rounds: list = field(default_factory=list)  # (node, |A_L|, |A_R|) per constraint
    position: int = 0

    @property
    def exhausted(self) -> bool:
        return self.position >= len(self.constraints)

    def off_path_child(self, node: int) -> int:
        on_path = self.leaf >> (self.instance.depth - node.bit_length())
        return on_path ^ 1


def generate(m: int, d: int, seed) -> tuple[AdversaryInstance, AdversaryRun]:
    """Draw the leaf and the whole halving schedule up front (the adversary is oblivious)."""
    depth = _log2_exact(m, "m")
    rounds = _log2_exact(d, "d")
    inst = AdversaryInstance(int(m), int(d))
    rng = np.random.default_rng(seed)
    leaf = int(rng.integers(m, 2 * m))
    path_nodes = [leaf >> h for h in range(depth, 0, -1)]
    constraints, schedule, survivors = [], [], {}
    for u in path_nodes:
        A_L = inst.edge_variables(2 * u)
        A_R = inst.edge_variables(2 * u + 1)
        for _ in range(rounds):
            support = A_L + A_R
            constraints.append(CoveringConstraint({v: 1.0 for v in support}, index=len(constraints) + 1))
            schedule.append((u, len(A_L), len(A_R)))
            A_L = sorted(np.asarray(A_L)[rng.permutation(len(A_L))[: len(A_L) // 2]].tolist())
            A_R = sorted(np.asarray(A_R)[rng.permutation(len(A_R))[: len(A_R) // 2]].tolist())
        survivors[u] = (A_L[0], A_R[0])
    run = AdversaryRun(inst, seed, leaf, path_nodes, constraints, survivors, schedule)
    return inst, run


def next_constraint(run: AdversaryRun) -> CoveringConstraint:
    if run.exhausted:
        raise StreamEnd(f"all {len(run.constraints)} constraints have been issued")
    C = run.constraints[run.position]
    run.position += 1
    return C


def offline_solution(run: AdversaryRun) -> list[int]:
    """The final survivor on the off-path child edge of every path node."""
    out = []
    for u in run.path_nodes:
        left, right = run.survivors[u]
        out.append(left if run.off_path_child(u) == 2 * u else right)
    return sorted(out)


def offline_opt(run: AdversaryRun, system: PackingSystem | None = None) -> PlantedCertificate:
    """Certificate of packing value 1, checked against every constraint of the run."""
    system = system or run.instance.packing_system()
    cert = PlantedCertificate(system, offline_solution(run))
    for C in run.constraints:
        cert.increment(C)
    load = system.load_vector(cert.xstar)
    if load.max() != 1.0:
        raise AssertionError(f"certificate packing value {load.max()} differs from 1")
    return cert


def lower_bound(m: int, d: int) -> float:
    """Expected violation forced on any online algorithm: (log2 m - 1) log2 d / 4."""
    return 0.25 * (math.log2(m) - 1) * math.log2(d)


def upper_bound(m: int, d: int, params: PotentialParams = DEFAULT_PARAMS) -> float:
    """Violation guarantee of the solver with k = log2 d: k log_rho(gamma m / (gamma - 1))."""
    return math.log2(d) * params.load_cap(m)


def default_solver_factory(system, params=DEFAULT_PARAMS):
    return OnlineSolver(system, params)


@dataclass
class TrialResult:
    trial: int
    seed: int
    max_violation: float
    max_F: float
    certificate_ok: bool


def run_trial(m, d, seed, trial=0, solver_factory=default_solver_factory, oracle=None, params=DEFAULT_PARAMS) -> TrialResult:
    inst, run = generate(m, d, seed)
    system = inst.packing_system()
    solver = solver_factory(system, params)
    oracle = oracle or BranchAndBoundOracle()
    while not run.exhausted:
        solver.arrive(next_constraint(run), oracle)
    load = system.load_vector(solver.state.x)
    ok = True
    try:
        offline_opt(run, inst.packing_system())
    except Exception:
        ok = False
    return TrialResult(trial, int(seed), float(load.max()), float(solver.F.max()), ok)


def evaluate(m, d, trials, seed, solver_factory=default_solver_factory, oracle=None, params=DEFAULT_PARAMS):
    """Independent seeded runs; returns (per-trial results, summary dict)."""
    if trials < 1:
        raise InstanceError("need at least one trial")
    results = [
        run_trial(m, d, trial_seed(seed, t), t, solver_factory, oracle, params)
        for t in range(trials)
    ]
    v = np.array([r.max_violation for r in results])
    lo, hi = lower_bound(m, d), upper_bound(m, d, params)
    summary = {
        "m": int(m),
        "d": int(d),
        "k": int(math.log2(d)),
        "trials": int(trials),
        "seed": int(seed),
        "mean_max_violation": float(v.mean()),
        "std_max_violation": float(v.std(ddof=1)) if trials > 1 else 0.0,
        "min_max_violation": float(v.min()),
        "p50_max_violation": float(np.percentile(v, 50)),
        "p90_max_violation": float(np.percentile(v, 90)),
        "max_max_violation": float(v.max()),
        "max_F": float(max(r.max_F for r in results)),
        "load_cap": params.load_cap(m),
        "lower_bound": lo,
        "upper_bound": hi,
        "certificates_ok": all(r.certificate_ok for r in results),
        "within_bounds": bool(lo <= v.mean() <= hi),
    }
    return results, summary
