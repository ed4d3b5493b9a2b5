"""Desk-scale benchmark: per instance, the IP optimum, the KC-LP optimum and
the cost/revenue of every cost-sharing method, normalised by the IP optimum.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .algorithms import fit_greedy_fixed, fit_greedy_minimal, greedy_solve, multi_user_primal_dual
from .core import CORE_TOL, Instance, dual_objective, induce_cost_shares
from .exact import AUDIT_CAP, SizeCapExceeded, solve_ip_exact, verify_core
from .kclp import column_generation_solve, naive_lp_value
from .lorawan import PROFILES, generate_instance

SCHEMA = "cipshare-bench/1"

COLUMNS = [
    "seed", "n", "m",
    "ip_opt", "kc_lp", "naive_lp", "pd_obj", "pd_rev", "gr_obj", "gr_rev", "grplus_rev", "dual_opt_rev",
    "norm_kc_lp", "norm_naive_lp", "norm_pd_obj", "norm_pd_rev", "norm_gr_obj", "norm_gr_rev",
    "norm_grplus_rev", "norm_dual_opt_rev",
    "naive_gap", "kc_gap", "greedy_lambda", "greedy_fixed_fallback", "greedy_original_feasible",
    "kclp_converged", "kclp_rounds", "kclp_cuts",
    "audit_dual_opt", "audit_pd", "audit_gr", "audit_grplus",
    "t_ip", "t_kclp", "t_pd", "t_greedy", "t_audit", "error",
]


class UsageError(Exception):
    pass


@dataclass
class BenchConfig:
    seeds: list[int]
    profile: str = "desk"
    overrides: dict = field(default_factory=dict)
    radio: dict = field(default_factory=dict)
    scale_k: int = 1000
    tol: float = CORE_TOL
    audit_cap: int = AUDIT_CAP
    ip_cap: int = 60
    jobs: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        if not doc:
            raise UsageError("benchmark config is empty")
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "seeds" not in doc:
            raise UsageError("benchmark config needs a 'seeds' list")
        seeds = doc["seeds"]
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        if doc.get("profile", "desk") not in PROFILES:
            raise UsageError(f"unknown profile {doc.get('profile')!r}")
        return cls(**{**doc, "seeds": [int(s) for s in seeds]})

    @classmethod
    def load(cls, path) -> "BenchConfig":
        text = Path(path).read_text().strip()
        if not text:
            raise UsageError(f"benchmark config {path} is empty")
        return cls.from_dict(json.loads(text))


def make_instance(cfg: BenchConfig, seed: int) -> Instance:
    gen, radio = PROFILES[cfg.profile]
    return generate_instance(replace(gen, seed=seed, **cfg.overrides), replace(radio, **cfg.radio))


def _audit(inst, shares, cfg, costs):
    if len(shares.user_set) > cfg.audit_cap:
        return "skipped", costs
    if costs is None:
        from .exact import all_subset_costs
        costs = all_subset_costs(inst, shares.user_set)
    return ("pass" if verify_core(inst, shares, cfg.tol, cfg.audit_cap, costs).passed else "fail"), costs


def run_instance(inst: Instance, cfg: BenchConfig, seed=None) -> dict:
    row: dict = {"seed": seed if seed is not None else inst.meta.get("seed", ""), "n": inst.n, "m": inst.m,
                 "error": ""}
    try:
        t = time.perf_counter()
        ip = solve_ip_exact(inst, cap=cfg.ip_cap)
        row["t_ip"] = time.perf_counter() - t

        t = time.perf_counter()
        kc = column_generation_solve(inst, scale=cfg.scale_k)
        dual_opt = induce_cost_shares(inst, kc.dual, method="dual-opt")
        row["t_kclp"] = time.perf_counter() - t

        t = time.perf_counter()
        pd_sel, pd_y = multi_user_primal_dual(inst)
        pd_shares = induce_cost_shares(inst, pd_y, method="primal-dual")
        row["t_pd"] = time.perf_counter() - t

        t = time.perf_counter()
        trace = greedy_solve(inst, scale=cfg.scale_k)
        fixed = fit_greedy_fixed(trace, inst)
        minimal = fit_greedy_minimal(trace, inst)
        row["t_greedy"] = time.perf_counter() - t

        row.update(
            ip_opt=ip.cost, kc_lp=kc.objective, naive_lp=naive_lp_value(inst),
            pd_obj=pd_sel.cost, pd_rev=pd_shares.total,
            gr_obj=trace.selection.cost, gr_rev=fixed.shares.total, grplus_rev=minimal.shares.total,
            dual_opt_rev=dual_opt.total,
            greedy_lambda=minimal.divisor, greedy_fixed_fallback=fixed.fallback,
            greedy_original_feasible=trace.original_feasible,
            kclp_converged=kc.converged, kclp_rounds=kc.rounds, kclp_cuts=kc.n_cuts,
        )
        for key in ("kc_lp", "naive_lp", "pd_obj", "pd_rev", "gr_obj", "gr_rev", "grplus_rev", "dual_opt_rev"):
            row["norm_" + key] = row[key] / ip.cost if ip.cost > 0 else math.nan
        row["naive_gap"] = ip.cost / row["naive_lp"] if row["naive_lp"] > 0 else math.inf
        row["kc_gap"] = ip.cost / kc.objective if kc.objective > 0 else math.inf

        t = time.perf_counter()
        costs = None
        for name, shares in (("dual_opt", dual_opt), ("pd", pd_shares), ("gr", fixed.shares),
                             ("grplus", minimal.shares)):
            row["audit_" + name], costs = _audit(inst, shares, cfg, costs)
        row["t_audit"] = time.perf_counter() - t
        # weak-duality sanity on the freshly computed values
        assert dual_objective(inst, kc.dual) <= ip.cost + cfg.tol
    except (SizeCapExceeded, AssertionError, ArithmeticError, ValueError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_seed(args):
    cfg, seed = args
    try:
        inst = make_instance(cfg, seed)
    except Exception as exc:  # recorded in the row; the run continues
        return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    return run_instance(inst, cfg, seed)


def run_rows(cfg: BenchConfig) -> list[dict]:
    work = [(cfg, s) for s in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_seed, work))
    return [_run_seed(w) for w in work]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_report(rows: list[dict], path, cfg: BenchConfig | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SCHEMA}\n")
        if cfg is not None:
            fh.write(f"# config: {json.dumps(asdict(cfg), sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in COLUMNS])


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        row = {}
        for k, v in rec.items():
            if v in ("True", "False"):
                row[k] = v == "True"
            else:
                try:
                    row[k] = int(v) if k in ("seed", "n", "m", "kclp_rounds", "kclp_cuts") else float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return rows


def run_benchmark(config_path, output_path, jobs: int | None = None) -> list[dict]:
    cfg = BenchConfig.load(config_path)
    if jobs is not None:
        cfg.jobs = jobs
    rows = run_rows(cfg)
    write_report(rows, output_path, cfg)
    return rows


def ordering_holds(row: dict, tol: float = 1e-9) -> bool:
    """DUAL-OPT >= PD >= Greedy+ >= Greedy revenue."""
    return (row["dual_opt_rev"] >= row["pd_rev"] - tol
            and row["pd_rev"] >= row["grplus_rev"] - tol
            and row["grplus_rev"] >= row["gr_rev"] - tol)


def summarize(rows: list[dict]) -> str:
    ok = [r for r in rows if not r.get("error")]
    lines = [f"{len(ok)}/{len(rows)} instances completed"]
    if not ok:
        return "\n".join(lines)
    header = ["IP-OPT", "KC-LP", "PD-Obj", "PD-Rev", "Gr-Obj", "Gr-Rev", "Gr+-Rev", "DUAL-OPT"]
    keys = ["kc_lp", "pd_obj", "pd_rev", "gr_obj", "gr_rev", "grplus_rev", "dual_opt_rev"]
    lines.append("seed  " + "  ".join(f"{h:>8}" for h in header))
    for r in ok:
        vals = [1.0] + [r["norm_" + k] for k in keys]
        lines.append(f"{r['seed']:<5} " + "  ".join(f"{v:8.3f}" for v in vals))
    means = [1.0] + [sum(r["norm_" + k] for r in ok) / len(ok) for k in keys]
    lines.append("mean  " + "  ".join(f"{v:8.3f}" for v in means))
    lines.append(f"revenue ordering DUAL-OPT >= PD >= Gr+ >= Gr on {sum(map(ordering_holds, ok))}/{len(ok)}")
    audits = [r[c] for r in ok for c in ("audit_dual_opt", "audit_pd", "audit_gr", "audit_grplus")]
    lines.append(f"core audits: {audits.count('pass')} pass, {audits.count('fail')} fail, "
                 f"{audits.count('skipped')} skipped")
    return "\n".join(lines)
