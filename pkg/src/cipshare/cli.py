"""Command-line entry point: ``cipshare {gen,solve,shares,verify-core,bench,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import algorithms as alg
from .bench import BenchConfig, UsageError, read_report, run_rows, summarize, write_report
from .core import CIPError, induce_cost_shares, is_feasible, recovery_ratio
from .exact import AUDIT_CAP, solve_ip_exact, verify_core
from .io import load_instance, save_instance, shares_from_dict, solution_to_dict, write_trace
from .kclp import column_generation_solve
from .lorawan import PROFILES, generate_instance

log = logging.getLogger("cipshare")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _users(arg, inst):
    if arg is None:
        return list(inst.users)
    return sorted({int(tok) for tok in arg.split(",") if tok.strip()})


def _write_json(doc, path):
    text = json.dumps(doc, indent=1)
    if path:
        Path(path).write_text(text + "\n")
    return text


def cmd_gen(args):
    gen, radio = PROFILES[args.profile]
    over = {"seed": args.seed}
    if args.users is not None:
        over["n_users"] = args.users
    if args.facilities is not None:
        over["n_facilities"] = args.facilities
    if args.q is not None:
        over["geometric_q"] = args.q
    inst = generate_instance(replace(gen, **over), radio)
    save_instance(inst, args.output)
    print(f"wrote {args.output}: n={inst.n} facilities, m={inst.m} users (profile {args.profile}, seed {args.seed})")
    return EXIT_OK


def cmd_solve(args):
    inst = load_instance(args.instance)
    users = _users(args.users, inst)
    extra = {}
    dual = None
    if args.method == "ip":
        sel = solve_ip_exact(inst, users, cap=args.ip_cap)
    elif args.method == "kclp":
        res = column_generation_solve(inst, users, scale=args.scale_k, cut_log_path=args.cut_log)
        dual, sel = res.dual, None
        extra = {"objective": res.objective, "x": res.x, "rounds": res.rounds, "converged": res.converged}
        print(f"KC-LP value {res.objective:.6f} after {res.rounds} rounds, {res.n_cuts} cuts"
              f"{'' if res.converged else ' (round cap hit)'}")
    elif args.method == "pd":
        trace = alg.multi_user_primal_dual_trace(inst, users)
        sel, dual = trace.selection, trace.dual
        if args.trace:
            write_trace(trace.dump_records(), args.trace)
    elif args.method == "greedy":
        trace = alg.greedy_solve(inst, users, scale=args.scale_k)
        sel, dual = trace.selection, trace.raw_dual
        extra = {"original_feasible": trace.original_feasible, "raw_dual_is_fitted": False}
        if args.trace:
            write_trace(trace.dump_records(), args.trace)
        if not trace.original_feasible:
            print("warning: greedy solution of the rounded instance is infeasible for the original data")
    else:
        res = alg.cross_monotone_mechanism(inst, users)
        sel, dual = res.selection, res.dual
        extra = {"delta": res.delta}
    if sel is not None:
        print(f"{args.method}: opened {len(sel.opened)} facilities, cost {sel.cost:.6f}, "
              f"feasible={is_feasible(inst, sel, users=users)}")
    _write_json(solution_to_dict(sel, dual, **extra), args.output)
    return EXIT_OK


def shares_for(inst, users, method, scale_k):
    if method == "dual-opt":
        res = column_generation_solve(inst, users, scale=scale_k)
        sel = solve_ip_exact(inst, users, cap=max(inst.n, 25)) if inst.n <= 60 else None
        return induce_cost_shares(inst, res.dual, users, method="dual-opt"), sel
    if method == "pd":
        sel, y = alg.multi_user_primal_dual(inst, users)
        return induce_cost_shares(inst, y, users, method="primal-dual"), sel
    if method in ("greedy", "greedy+"):
        trace = alg.greedy_solve(inst, users, scale=scale_k)
        fit = alg.fit_greedy_fixed if method == "greedy" else alg.fit_greedy_minimal
        return fit(trace, inst).shares, trace.selection
    res = alg.cross_monotone_mechanism(inst, users)
    return res.shares, res.selection


def cmd_shares(args):
    inst = load_instance(args.instance)
    users = _users(args.users, inst)
    shares, sel = shares_for(inst, users, args.method, args.scale_k)
    doc = solution_to_dict(sel, None, shares)
    if sel is not None and sel.cost > 0:
        doc["recovery"] = recovery_ratio(shares, sel)
        print(f"{args.method}: revenue {shares.total:.6f} of cost {sel.cost:.6f} "
              f"({100 * doc['recovery']:.1f}% recovered)")
    _write_json(doc, args.output)
    return EXIT_OK


def cmd_verify_core(args):
    inst = load_instance(args.instance)
    shares = shares_from_dict(json.loads(Path(args.shares).read_text()))
    audit = verify_core(inst, shares, tol=args.tol, cap=args.audit_cap)
    if args.report:
        audit.write(args.report)
    J, cJ, paid, slack = audit.worst
    print(f"core property {'holds' if audit.passed else 'VIOLATED'} over {len(audit.records)} coalitions; "
          f"tightest {sorted(J)}: pays {paid:.6g} vs stand-alone {cJ:.6g} (slack {slack:.3g})")
    return EXIT_OK if audit.passed else EXIT_FAIL


def cmd_bench(args):
    cfg = BenchConfig.load(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    for flag, attr in (("scale_k", "scale_k"), ("tol", "tol"), ("audit_cap", "audit_cap"), ("profile", "profile")):
        if getattr(args, flag) is not None:
            setattr(cfg, attr, getattr(args, flag))
    if args.seed is not None:
        cfg.seeds = [args.seed]
    rows = run_rows(cfg)
    write_report(rows, args.output, cfg)
    print(summarize(rows))
    failed = [r for r in rows if r.get("error") or "fail" in
              (r.get("audit_dual_opt"), r.get("audit_pd"), r.get("audit_gr"), r.get("audit_grplus"))]
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(args):
    print(summarize(read_report(args.report)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cipshare", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a LoRaWAN-style instance")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--users", type=int)
    g.add_argument("--facilities", type=int)
    g.add_argument("--q", type=float, help="geometric parameter for requirement sampling")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=["ip", "kclp", "pd", "greedy", "mechanism"], default="ip")
    s.add_argument("--users", help="comma-separated user subset (default: all)")
    s.add_argument("-o", "--output")
    s.add_argument("--trace")
    s.add_argument("--cut-log")
    s.add_argument("--scale-k", type=int, default=1000)
    s.add_argument("--ip-cap", type=int, default=60)
    s.set_defaults(func=cmd_solve)

    sh = sub.add_parser("shares", help="compute cost shares")
    sh.add_argument("instance")
    sh.add_argument("--method", choices=["dual-opt", "pd", "greedy", "greedy+", "mechanism"], default="dual-opt")
    sh.add_argument("--users")
    sh.add_argument("-o", "--output")
    sh.add_argument("--scale-k", type=int, default=1000)
    sh.set_defaults(func=cmd_shares)

    v = sub.add_parser("verify-core", help="audit shares against every coalition's stand-alone cost")
    v.add_argument("instance")
    v.add_argument("shares")
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--audit-cap", type=int, default=AUDIT_CAP)
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify_core)

    b = sub.add_parser("bench", help="run the benchmark described by a JSON config")
    b.add_argument("config")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--jobs", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--profile", choices=sorted(PROFILES))
    b.add_argument("--scale-k", type=int)
    b.add_argument("--tol", type=float)
    b.add_argument("--audit-cap", type=int)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="summarise a benchmark CSV")
    r.add_argument("report")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CIPError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
