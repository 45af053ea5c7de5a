"""JSON instance files and random instance generators."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import CoveringConstraint, PackingSystem, PlantedCertificate
from .errors import CapacityError, InfeasibleError, InstanceFormatError
from .graphs import WeightedGraph, check_demands


def _load_json(path_or_text, source=None):
    if isinstance(path_or_text, (dict, list)):
        return path_or_text, source or "<data>"
    text = path_or_text
    if source is None:
        source = str(path_or_text)
        with open(path_or_text) as fh:
            text = fh.read()
    try:
        return json.loads(text), source
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None


def _need(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise InstanceFormatError(f"missing field {key!r}", where)
    val = obj[key]
    if kind is not None and (isinstance(val, bool) or not isinstance(val, kind)):
        raise InstanceFormatError(f"field {key!r} has wrong type {type(val).__name__}", f"{where}.{key}")
    return val


def _number(val, where):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InstanceFormatError(f"expected a number, got {val!r}", where)
    return val


# ---------------------------------------------------------------------------
# packing/covering instances


@dataclass
class OmpcInstance:
    system: PackingSystem
    constraints: list
    certificate: list | None = None

    def make_certificate(self):
        if self.certificate is None:
            return None
        return PlantedCertificate(self.system, self.certificate)

    def variables(self):
        return sorted(self.system.variables())

    def to_json(self) -> dict:
        return {
            "m": self.system.m,
            "k": self.system.k,
            "variables": [
                {"id": v, "column": [[i, c] for i, c in self.system.column(v)]} for v in self.variables()
            ],
            "covering": [{"coeffs": {v: C.coeffs[v] for v in C.support}} for C in self.constraints],
            **({"certificate": sorted(self.certificate)} if self.certificate is not None else {}),
        }


def load_ompc(path_or_text, source=None) -> OmpcInstance:
    """Parse ``{m, k, variables: [{id, column}], covering: [{coeffs}], certificate?}``; ids become strings."""
    data, src = _load_json(path_or_text, source)
    m = _need(data, "m", src, int)
    k = _need(data, "k", src, int)
    columns = {}
    for n, var in enumerate(_need(data, "variables", src, list)):
        where = f"{src}: variables[{n}]"
        vid = str(_need(var, "id", where, (str, int)))
        if vid in columns:
            raise InstanceFormatError(f"duplicate variable id {vid!r}", where)
        col = []
        for q, entry in enumerate(_need(var, "column", where, list)):
            if not isinstance(entry, list) or len(entry) != 2:
                raise InstanceFormatError("column entries are [row, coeff] pairs", f"{where}.column[{q}]")
            i = _number(entry[0], f"{where}.column[{q}][0]")
            c = _number(entry[1], f"{where}.column[{q}][1]")
            if int(i) != i or not 0 <= i < m:
                raise InstanceFormatError(f"row {i} outside 0..{m - 1}", f"{where}.column[{q}][0]")
            if c < 0:
                raise InstanceFormatError(f"negative coefficient {c}", f"{where}.column[{q}][1]")
            col.append((int(i), float(c)))
        columns[vid] = col
    try:
        system = PackingSystem(m, k, columns)
    except ValueError as exc:
        raise InstanceFormatError(str(exc), src) from None
    constraints = []
    for j, row in enumerate(_need(data, "covering", src, list)):
        where = f"{src}: covering[{j}]"
        coeffs = {}
        for vid, c in _need(row, "coeffs", where, dict).items():
            if vid not in columns:
                raise InstanceFormatError(f"unknown variable {vid!r}", f"{where}.coeffs")
            c = _number(c, f"{where}.coeffs.{vid}")
            if not c > 0:
                raise InstanceFormatError(f"coefficient must be positive, got {c}", f"{where}.coeffs.{vid}")
            coeffs[vid] = float(c)
        if not coeffs:
            raise InstanceFormatError("empty covering constraint", where)
        constraints.append(CoveringConstraint(coeffs, index=j + 1))
    cert = None
    if "certificate" in data:
        cert = []
        for q, vid in enumerate(_need(data, "certificate", src, list)):
            vid = str(vid)
            if vid not in columns:
                raise InstanceFormatError(f"unknown variable {vid!r}", f"{src}: certificate[{q}]")
            cert.append(vid)
    return OmpcInstance(system, constraints, cert)


def random_planted_ompc(rng: np.random.Generator, max_m=8, max_support=6, max_k=3, max_constraints=10) -> OmpcInstance:
    """Random instance with an optimal packing value of at most 1 planted in it.

    Certificate variables carry columns scaled so their sum stays within 1 per
    row; each constraint gets one certificate variable with coefficient 1 plus
    random decoys.  No variable appears in more than k constraints.
    """
    m = int(rng.integers(1, max_m + 1))
    k = int(rng.integers(1, max_k + 1))
    J = int(rng.integers(1, max_constraints + 1))
    n_planted = -(-J // k)
    n_decoys = int(rng.integers(1, 3 * max_support))

    def rand_column(scale):
        rows = rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False)
        return {int(i): round(float(rng.uniform(0.05, 1.0)) * scale, 3) or 0.001 for i in rows}

    planted = [rand_column(1.0) for _ in range(n_planted)]
    row_tot = np.zeros(m)
    for col in planted:
        for i, c in col.items():
            row_tot[i] += c
    for col in planted:
        for i in col:
            if row_tot[i] > 1.0:
                col[i] = np.floor(col[i] / row_tot[i] * 1000) / 1000 or 0.001
    columns = {f"p{t}": sorted(c.items()) for t, c in enumerate(planted)}
    for t in range(n_decoys):
        columns[f"d{t}"] = sorted(rand_column(float(rng.choice([0.3, 0.6, 1.2]))).items())
    freq = {v: 0 for v in columns}
    constraints = []
    planted_ids = [f"p{t}" for t in range(n_planted)]
    decoys = [v for v in columns if v.startswith("d")]
    for j in range(J):
        owner = planted_ids[j // k]
        coeffs = {owner: 1.0}
        freq[owner] += 1
        free = [v for v in decoys if freq[v] < k]
        extra = int(rng.integers(0, min(max_support - 1, len(free)) + 1))
        for v in rng.choice(free, size=extra, replace=False) if extra else []:
            v = str(v)
            coeffs[v] = round(float(rng.uniform(0.2, 1.2)), 3)
            freq[v] += 1
        constraints.append(CoveringConstraint(coeffs, index=j + 1))
    system = PackingSystem(m, k, columns)
    inst = OmpcInstance(system, constraints, planted_ids)
    inst.make_certificate()
    return inst


# ---------------------------------------------------------------------------
# Steiner instances


@dataclass
class SteinerInstance:
    graph: WeightedGraph
    demands: tuple

    def to_json(self) -> dict:
        g = self.graph
        return {
            "vertices": g.n,
            "edges": [[u, v, w] for u, v, w in g.edges],
            "bounds": list(g.bounds),
            "demands": [list(p) for p in self.demands],
        }


def load_steiner(path_or_text, source=None) -> SteinerInstance:
    """Parse ``{vertices, edges: [[u, v, w]], bounds: int | [b_v], demands: [[s, t]]}``."""
    data, src = _load_json(path_or_text, source)
    n = _need(data, "vertices", src, int)
    edges = []
    for q, e in enumerate(_need(data, "edges", src, list)):
        where = f"{src}: edges[{q}]"
        if not isinstance(e, list) or len(e) != 3:
            raise InstanceFormatError("edges are [u, v, weight] triples", where)
        u, v, w = (_number(x, f"{where}[{p}]") for p, x in enumerate(e))
        edges.append((u, v, w))
    bounds = _need(data, "bounds", src, (int, list))
    if isinstance(bounds, list):
        bounds = [int(_number(b, f"{src}: bounds[{q}]")) for q, b in enumerate(bounds)]
    demands = []
    for q, p in enumerate(_need(data, "demands", src, list)):
        if not isinstance(p, list) or len(p) != 2:
            raise InstanceFormatError("demands are [s, t] pairs", f"{src}: demands[{q}]")
        demands.append(tuple(int(_number(x, f"{src}: demands[{q}]")) for x in p))
    try:
        graph = WeightedGraph.build(n, edges, bounds)
        demands = check_demands(graph, demands)
    except ValueError as exc:
        raise InstanceFormatError(str(exc), src) from None
    return SteinerInstance(graph, demands)


def random_steiner_instance(rng: np.random.Generator, max_n=12, max_demands=5, max_edges=18, max_weight=10, extra_edges=4):
    """Connected graph: random spanning tree plus a few chords, integer weights, bounds in 1..3."""
    n = int(rng.integers(4, max_n + 1))
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = int(rng.integers(1, max_weight + 1))
    budget = min(max_edges, n - 1 + int(rng.integers(0, extra_edges + 1)))
    attempts = 0
    while len(edges) < budget and attempts < 100:
        attempts += 1
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        if (u, v) not in edges:
            edges[(u, v)] = int(rng.integers(1, max_weight + 1))
    bounds = rng.choice([1, 2, 2, 3, 3], size=n).tolist()
    n_dem = int(rng.integers(1, max_demands + 1))
    demands = [tuple(int(x) for x in rng.choice(n, size=2, replace=False)) for _ in range(n_dem)]
    graph = WeightedGraph.build(n, [(u, v, w) for (u, v), w in sorted(edges.items())], bounds)
    return SteinerInstance(graph, tuple(demands))


def sample_solvable_steiner(rng, with_ipgood=True, max_tries=200, **kw):
    """Random Steiner instance that is feasible and small enough for the exact baselines.

    Returns ``(instance, steiner_opt, ipgood_opt_or_None)``.
    """
    from .baseline import offline_ipgood_opt, offline_steiner_opt

    for _ in range(max_tries):
        inst = random_steiner_instance(rng, **kw)
        try:
            sf = offline_steiner_opt(inst.graph, inst.demands)
            ip = offline_ipgood_opt(inst.graph, inst.demands, sf.value) if with_ipgood else None
        except (InfeasibleError, CapacityError):
            continue
        return inst, sf, ip
    raise InfeasibleError("no solvable instance found")
