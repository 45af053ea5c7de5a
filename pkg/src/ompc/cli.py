"""Command-line experiment runner.

Exit codes: 0 success, 1 usage or input error, 2 infeasible instance,
3 a verification check failed.  Output goes to ``--out``, else to
``$OMPC_OUTPUT_DIR``, else to ``./out``.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import math
import os
import sys

import numpy as np

from . import adversary, baseline, structural
from .core import OnlineSolver, PotentialParams
from .errors import CapacityError, InfeasibleError, InstanceError, OmpcError
from .instances import OmpcInstance, load_ompc, load_steiner
from .oracles import BranchAndBoundOracle, ExactEnumerationOracle
from .steiner import ratio_report, run_online, run_with_doubling

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CHECK_FAILED = 0, 1, 2, 3
OUTPUT_ENV = "OMPC_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def output_dir(args) -> str:
    path = args.out or os.environ.get(OUTPUT_ENV) or "out"
    os.makedirs(path, exist_ok=True)
    return path


def _params(args) -> PotentialParams:
    return PotentialParams(gamma=args.gamma, rho=args.rho)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_ompc(args):
    inst = load_ompc(args.instance)
    params = _params(args)
    oracle = ExactEnumerationOracle(args.cap) if args.oracle == "exact" else BranchAndBoundOracle()
    solver = OnlineSolver(inst.system, params, certificate=inst.make_certificate())
    for C in inst.constraints:
        solver.arrive(C, oracle)
    out = output_dir(args)
    stem = args.name or "ompc"
    write_csv(
        os.path.join(out, f"{stem}_trace.csv"),
        ["step", "chosenSetSize", "tauValue", "maxF", "maxViolation", "phi"],
        [(r.step, len(r.chosen), r.tau, r.max_F, r.max_violation, "" if r.phi is None else r.phi) for r in solver.trace],
    )
    viol = solver.violation_profile()
    summary = {
        "m": inst.system.m,
        "k": inst.system.k,
        "steps": len(solver.trace),
        "max_F": float(solver.F.max()),
        "max_violation": float(viol.max()),
        "load_cap": params.load_cap(inst.system.m),
        "violation_cap": inst.system.k * params.load_cap(inst.system.m),
        "chosen": [list(r.chosen) for r in solver.trace],
        "gamma": params.gamma,
        "rho": params.rho,
    }
    write_json(os.path.join(out, f"{stem}_summary.json"), summary)
    return EXIT_OK


def _try_offline(graph, demands):
    try:
        return baseline.offline_steiner_opt(graph, demands).value
    except CapacityError:
        return None


def cmd_solve_steiner(args):
    inst = load_steiner(args.instance)
    g, D = inst.graph, inst.demands
    params = _params(args)
    out = output_dir(args)
    stem = args.name or "steiner"
    if args.doubling:
        res = run_with_doubling(g, D, r=args.ratio, params=params, oracle=args.oracle)
        sol = res.solution
        w_ref = args.w_opt if args.w_opt is not None else _try_offline(g, D)
        extra = {
            "mode": "doubling",
            "ratio": res.ratio,
            "threshold": res.threshold,
            "initial_guess": res.initial_guess,
            "final_guess": res.final_guess,
            "phase_count": res.phase_count,
            "cumulative_phase_weight": res.cumulative_phase_weight(),
            "phases": [vars(p) for p in res.phases],
        }
        w_guess = None
    else:
        if args.w_opt is None:
            raise UsageError("solve-steiner needs --w-opt or --doubling")
        eng = run_online(g, D, args.w_opt, params=params, oracle=args.oracle)
        sol = eng.solution
        w_ref = args.w_opt
        w_guess = args.w_opt
        extra = {"mode": "known-opt"}
    ip_alpha = None
    if args.ip_alpha and w_ref is not None:
        try:
            ip_alpha = baseline.offline_ipgood_opt(g, D, w_ref).value
        except CapacityError:
            ip_alpha = None
    write_csv(
        os.path.join(out, f"{stem}_demands.csv"),
        ["demand", "edges", "weight", "maxDegreeLoad", "phase"],
        _demand_rows(sol, g),
    )
    report = ratio_report(sol, g, w_ref if w_ref else math.nan, ip_alpha, params, w_guess)
    report.update(extra)
    report["augmentations"] = [list(a) for a in sol.augmentations]
    write_json(os.path.join(out, f"{stem}_report.json"), report)
    return EXIT_OK


def _demand_rows(sol, g):
    deg = np.zeros(g.n)
    bounds = np.asarray(g.bounds, dtype=np.float64)
    rows = []
    for i, edges in enumerate(sol.augmentations):
        for e in edges:
            u, v, _ = g.edges[e]
            deg[u] += 1
            deg[v] += 1
        rows.append((i, len(edges), float(sol.augmentation_weight(i)), float((deg / bounds).max()), sol.phase_of[i]))
    return rows


def cmd_gen_adversary(args):
    inst, run = adversary.generate(args.m, args.d, args.seed)
    system = inst.packing_system()
    variables = range(inst.n_variables)
    data = {
        "m": inst.m,
        "k": inst.k,
        "variables": [{"id": str(v), "column": [[i, c] for i, c in system.column(v)]} for v in variables],
        "covering": [{"coeffs": {str(v): C.coeffs[v] for v in C.support}} for C in run.constraints],
        "certificate": [str(v) for v in adversary.offline_solution(run)],
    }
    out = output_dir(args)
    stem = args.name or f"adversary_m{args.m}_d{args.d}_s{args.seed}"
    write_json(os.path.join(out, f"{stem}.json"), data)
    write_json(
        os.path.join(out, f"{stem}_run.json"),
        {"seed": args.seed, "leaf": run.leaf, "path_nodes": run.path_nodes, "rounds": run.rounds},
    )
    return EXIT_OK


def cmd_eval_adversary(args):
    params = _params(args)
    results, summary = adversary.evaluate(args.m, args.d, args.trials, args.seed, params=params)
    out = output_dir(args)
    stem = args.name or f"adversary_m{args.m}_d{args.d}"
    write_csv(
        os.path.join(out, f"{stem}_trials.csv"),
        ["trial", "seed", "maxViolation"],
        [(r.trial, r.seed, r.max_violation) for r in results],
    )
    write_json(os.path.join(out, f"{stem}_summary.json"), summary)
    return EXIT_OK if summary["certificates_ok"] else EXIT_CHECK_FAILED


def cmd_verify_structural(args):
    rng = np.random.default_rng(args.seed)
    split_fail = []
    for t in range(args.split_trees):
        n = int(rng.integers(3, args.split_max_n + 1))
        tree = structural.random_tree(n, rng)
        probs = structural.check_split(tree, structural.split_tree(tree))
        if probs:
            split_fail.append({"tree": t, "n": n, "problems": probs})
    conn_fail = []
    worst = 0.0
    cut_checked = 0
    max_mult = 0
    for t in range(args.trees):
        n, edges, demands = structural.random_connective_instance(rng, args.max_n, args.max_demands)
        Q = structural.build_connective(n, edges, demands)
        rep = structural.verify_connective(Q, n, edges, demands)
        cut_checked += rep.cut_checked
        max_mult = max(max_mult, rep.max_multiplicity)
        if rep.bound:
            worst = max(worst, rep.max_multiplicity / rep.bound)
        if not rep.ok:
            conn_fail.append({"instance": t, "n": n, "problems": rep.problems})
    summary = {
        "seed": args.seed,
        "split_trees": args.split_trees,
        "split_failures": split_fail,
        "connective_instances": args.trees,
        "connective_failures": conn_fail,
        "literal_cut_checked": cut_checked,
        "max_multiplicity": max_mult,
        "worst_multiplicity_over_bound": worst,
        "all_pass": not split_fail and not conn_fail,
    }
    write_json(os.path.join(output_dir(args), args.name or "structural_summary.json"), summary)
    return EXIT_OK if summary["all_pass"] else EXIT_CHECK_FAILED


def cmd_round_trial(args):
    trials = structural.rounding_trials(args.n, args.trials, args.seed)
    out = output_dir(args)
    stem = args.name or f"rounding_n{args.n}"
    write_csv(
        os.path.join(out, f"{stem}_trials.csv"),
        ["trial", "maxLoadP", "maxLoadQ", "ratio"],
        [(t.trial, t.max_load_p, t.max_load_q, t.ratio) for t in trials],
    )
    log_n = math.log2(args.n)
    within = sum(t.max_load_q <= args.constant * max(t.max_load_p, log_n) for t in trials)
    summary = {
        "n": args.n,
        "trials": args.trials,
        "seed": args.seed,
        "constant": args.constant,
        "within_bound": within,
        "max_load_p": max(t.max_load_p for t in trials),
        "max_load_q": max(t.max_load_q for t in trials),
        "mean_ratio": float(np.mean([t.ratio for t in trials])),
    }
    write_json(os.path.join(out, f"{stem}_summary.json"), summary)
    return EXIT_OK


def cmd_baseline(args):
    out = output_dir(args)
    if args.kind == "ompc":
        inst: OmpcInstance = load_ompc(args.instance)
        payload = inst.to_json()
        res = baseline.cached(args.cache, "ompc", payload, lambda: _strip(baseline.offline_ompc_opt(inst.system, inst.constraints)))
    else:
        inst = load_steiner(args.instance)
        payload = inst.to_json()
        sf = baseline.cached(args.cache, "steiner", payload,
                             lambda: _strip(baseline.offline_steiner_opt(inst.graph, inst.demands)))
        res = {"steiner": sf}
        if args.kind == "ipgood":
            w = args.w_opt if args.w_opt is not None else sf["value"]
            res["ipgood"] = baseline.cached(
                args.cache, "ipgood", {**payload, "w_opt": w},
                lambda: _strip(baseline.offline_ipgood_opt(inst.graph, inst.demands, w)),
            )
    write_json(os.path.join(out, args.name or f"baseline_{args.kind}.json"), res)
    return EXIT_OK


def _strip(result):
    # timings are dropped so repeated runs are byte-identical
    d = result.to_json()
    d["stats"] = {k: v for k, v in d["stats"].items() if k != "seconds"}
    return d


def cmd_report(args):
    out = output_dir(args)
    src = args.input or out
    combined = {}
    for path in sorted(glob.glob(os.path.join(src, "*.json"))):
        name = os.path.basename(path)
        if name in ("report.json",):
            continue
        with open(path) as fh:
            try:
                combined[name] = json.load(fh)
            except json.JSONDecodeError:
                continue
    write_json(os.path.join(out, "report.json"), combined)
    lines = ["| file | key | value |", "|---|---|---|"]
    for name, data in combined.items():
        if not isinstance(data, dict):
            continue
        for key, val in sorted(data.items()):
            if isinstance(val, (int, float, str, bool)):
                lines.append(f"| {name} | {key} | {val} |")
    with open(os.path.join(out, "report.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="ompc", description="Online packing/covering solver experiments")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, params=False):
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./out)")
        sp.add_argument("--name", help="output file stem")
        if params:
            sp.add_argument("--gamma", type=float, default=2.0)
            sp.add_argument("--rho", type=float, default=1.5)

    sp = sub.add_parser("solve-ompc", help="run the online solver on a packing/covering instance")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--oracle", choices=["exact", "bnb"], default="exact")
    sp.add_argument("--cap", type=int, default=20, help="support size cap of the exact oracle")
    common(sp, True)
    sp.set_defaults(func=cmd_solve_ompc)

    sp = sub.add_parser("solve-steiner", help="online degree-bounded Steiner forest")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--w-opt", type=float)
    sp.add_argument("--doubling", action="store_true")
    sp.add_argument("--ratio", type=float, default=2.0)
    sp.add_argument("--oracle", choices=["path", "exact"], default="path")
    sp.add_argument("--ip-alpha", action="store_true", help="also brute-force the path-formulation optimum")
    common(sp, True)
    sp.set_defaults(func=cmd_solve_steiner)

    sp = sub.add_parser("gen-adversary", help="write one lower-bound instance")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_gen_adversary)

    sp = sub.add_parser("eval-adversary", help="run the solver against seeded lower-bound instances")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, required=True)
    common(sp, True)
    sp.set_defaults(func=cmd_eval_adversary)

    sp = sub.add_parser("verify-structural", help="self-check tree splits and connective lists")
    sp.add_argument("--trees", type=int, default=300)
    sp.add_argument("--max-n", type=int, default=64)
    sp.add_argument("--max-demands", type=int, default=20)
    sp.add_argument("--split-trees", type=int, default=10_000)
    sp.add_argument("--split-max-n", type=int, default=200)
    sp.add_argument("--seed", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_verify_structural)

    sp = sub.add_parser("round-trial", help="randomized rounding of pair assignments")
    sp.add_argument("--n", type=int, default=256)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--constant", type=float, default=8.0)
    sp.add_argument("--seed", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_round_trial)

    sp = sub.add_parser("baseline", help="exact offline optimum by brute force")
    sp.add_argument("--kind", choices=["ompc", "steiner", "ipgood"], required=True)
    sp.add_argument("--instance", required=True)
    sp.add_argument("--w-opt", type=float)
    sp.add_argument("--cache", help="directory for cached results")
    common(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("report", help="collect JSON summaries into report.json and report.md")
    sp.add_argument("--input", help="directory to scan (default: output directory)")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OmpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
