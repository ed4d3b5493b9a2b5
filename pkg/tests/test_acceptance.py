"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from cipshare.algorithms import (
    cross_monotone_mechanism, fit_greedy_fixed, fit_greedy_minimal, greedy_solve, min_cost_knapsack_pd,
    multi_user_primal_dual,
)
from cipshare.bench import BenchConfig, make_instance, ordering_holds, run_rows
from cipshare.core import (
    Instance, dual_feasibility_slack, dual_objective, induce_cost_shares, is_dual_feasible, pathological_instance,
    recovery_ratio,
)
from cipshare.exact import (
    all_subset_costs, kc_lp_exact, solve_ip_enumerate, solve_ip_exact, verify_core,
)
from cipshare.kclp import column_generation_solve, naive_lp_value
from cipshare.lorawan import PROFILES, generate_instance, hata_path_loss, reliability_to_cip
from instances import random_instance

CORE_TOL = 1e-6


def test_core_property_for_every_method(record_criterion):
    rng = np.random.default_rng(20240101)
    t0, audited, failures = time.perf_counter(), 0, []
    for k in range(200):
        inst = random_instance(rng, int(rng.integers(1, 9)), int(rng.integers(1, 6)), integer=k % 4 == 0)
        costs = all_subset_costs(inst)
        trace = greedy_solve(inst)
        share_sets = {
            "dual-opt": induce_cost_shares(inst, column_generation_solve(inst).dual),
            "pd": induce_cost_shares(inst, multi_user_primal_dual(inst)[1]),
            "greedy": fit_greedy_fixed(trace, inst).shares,
            "greedy+": fit_greedy_minimal(trace, inst).shares,
            "mechanism": cross_monotone_mechanism(inst).shares,
        }
        for name, shares in share_sets.items():
            audited += 1
            audit = verify_core(inst, shares, tol=CORE_TOL, costs=costs)
            if not audit.passed:
                failures.append((k, name, audit.worst))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    record_criterion(1, ok, f"{audited} share vectors on 200 instances audited, {len(failures)} core "
                            f"violations, {elapsed:.1f}s")
    assert ok, failures[:3]


def test_single_user_factor_two(record_criterion):
    rng = np.random.default_rng(7)
    t0, worst, bad = time.perf_counter(), 0.0, 0
    for k in range(500):
        inst = random_instance(rng, int(rng.integers(1, 11)), 1, integer=k % 3 == 0)
        sel, y = min_cost_knapsack_pd(inst, 0)
        obj = dual_objective(inst, y)
        if not (sel.cost <= 2 * obj + 1e-9 and is_dual_feasible(inst, y)):
            bad += 1
        if obj > 0:
            worst = max(worst, sel.cost / obj)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    record_criterion(2, ok, f"500 instances, {bad} failures, worst cost/dual {worst:.3f}, {elapsed:.1f}s")
    assert ok


def test_mechanism_cross_monotone_and_budget(record_criterion):
    rng = np.random.default_rng(99)
    t0, mono_bad, budget_bad, checks = time.perf_counter(), 0, 0, 0
    for _ in range(100):
        inst = random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(2, 6)))
        U = sorted(rng.choice(inst.m, size=int(rng.integers(1, inst.m + 1)), replace=False).tolist())
        J = sorted(rng.choice(U, size=int(rng.integers(1, len(U) + 1)), replace=False).tolist())
        big, small = cross_monotone_mechanism(inst, U), cross_monotone_mechanism(inst, J)
        for j in J:
            checks += 1
            mono_bad += big.shares.shares[j] > small.shares.shares[j] + 1e-9
        budget_bad += big.shares.total < big.selection.cost / (2 * big.delta) - 1e-9
    elapsed = time.perf_counter() - t0
    ok = mono_bad == 0 and budget_bad == 0 and elapsed < 60
    record_criterion(3, ok, f"100 instances, {checks} nested-subset share checks, {mono_bad} monotonicity and "
                            f"{budget_bad} recovery failures, {elapsed:.1f}s")
    assert ok


def test_pathological_gap_instance(record_criterion):
    inst = pathological_instance(R=10, eps=0.01)
    naive = naive_lp_value(inst)
    cg = column_generation_solve(inst)
    enum_value = kc_lp_exact(inst)[0]
    ip = solve_ip_exact(inst)
    shares = induce_cost_shares(inst, cg.dual)
    recovery = recovery_ratio(shares, ip)
    ok = (abs(naive - 0.11) <= 1e-6 and abs(cg.objective - 1.0) <= 1e-6 and abs(enum_value - 1.0) <= 1e-6
          and abs(ip.cost - 1.0) <= 1e-12 and abs(recovery - 1.0) <= 1e-6)
    record_criterion(4, ok, f"naive LP {naive:.6f}, KC-LP {cg.objective:.6f} (CG) / {enum_value:.6f} (enum), "
                            f"IP {ip.cost:.6f}, recovery {100 * recovery:.2f}%")
    assert ok


def test_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(5)
    t0, kc_bad, ip_bad, worst = time.perf_counter(), 0, 0, 0.0
    for k in range(60):
        inst = random_instance(rng, int(rng.integers(2, 13)), int(rng.integers(1, 5)), integer=k % 3 == 0)
        # integer instances also exercise the DP oracle at scale 1, where it is exact
        modes = ["auto", "dp"] if k % 3 == 0 else ["auto"]
        exact = kc_lp_exact(inst)[0]
        for mode in modes:
            cg = column_generation_solve(inst, separation=mode, scale=1 if mode == "dp" else 1000,
                                         dp_budget=10**6)
            gap = abs(cg.objective - exact)
            worst = max(worst, gap)
            kc_bad += gap > 1e-6
        ip_bad += abs(solve_ip_exact(inst).cost - solve_ip_enumerate(inst).cost) > 1e-9
    elapsed = time.perf_counter() - t0
    ok = kc_bad == 0 and ip_bad == 0 and elapsed < 120
    record_criterion(5, ok, f"60 instances: {kc_bad} KC-LP mismatches (worst {worst:.1e}), {ip_bad} IP "
                            f"mismatches, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def desk_rows():
    cfg = BenchConfig(seeds=list(range(10)), profile="desk")
    t0 = time.perf_counter()
    rows = run_rows(cfg)
    return cfg, rows, time.perf_counter() - t0


def test_weak_duality_sandwich(record_criterion, desk_rows):
    cfg, rows, _ = desk_rows
    bad = []
    for r in rows:
        tol = 1e-6
        kc = r["kc_lp"]
        inst = make_instance(cfg, r["seed"])
        mech = dual_objective(inst, cross_monotone_mechanism(inst).dual)
        duals = {"dual-opt": r["dual_opt_rev"], "pd": r["pd_rev"], "greedy": r["gr_rev"],
                 "greedy+": r["grplus_rev"], "mechanism": mech}
        if not (r["naive_lp"] <= kc + tol and kc <= r["ip_opt"] + tol):
            bad.append((r["seed"], "sandwich"))
        bad += [(r["seed"], k) for k, v in duals.items() if v > kc + tol]
    ok = not bad and all(not r["error"] for r in rows)
    record_criterion(6, ok, f"{len(rows)} desk instances: naive <= KC-LP <= IP and 5 dual objectives <= KC-LP, "
                            f"{len(bad)} violations")
    assert ok, bad


def test_desk_benchmark_revenue_ordering(record_criterion, desk_rows):
    _, rows, elapsed = desk_rows
    done = [r for r in rows if not r["error"]]
    ordered = sum(map(ordering_holds, done))
    identity = all(math.isclose(r["dual_opt_rev"] / r["ip_opt"], 1 / r["kc_gap"], rel_tol=1e-9) for r in done)
    shape = all((r["n"], r["m"]) == (60, 40) for r in done)
    ok = len(done) == 10 and shape and ordered >= 8 and identity and elapsed < 300
    mean = np.mean([r["norm_dual_opt_rev"] for r in done]) if done else float("nan")
    record_criterion(7, ok, f"{len(done)}/10 instances, ordering on {ordered}/10, DUAL-OPT/IP = 1/kc_gap "
                            f"{'on all' if identity else 'FAILS'}, mean DUAL-OPT recovery {mean:.3f}, "
                            f"{elapsed:.0f}s")
    assert ok


def test_radio_chain(record_criterion):
    loss = hata_path_loss(1.0)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(500):
        rho = rng.uniform(0, 0.999, 10)
        chosen = rng.uniform(size=10) < 0.5
        a, _ = reliability_to_cip(rho, [0.5])
        lhs, rhs = math.exp(-a[chosen].sum()), float(np.prod(1 - rho[chosen]))
        worst = max(worst, abs(lhs - rhs) / rhs)
    gen, radio = PROFILES["desk"]
    feasible = all(generate_instance(replace(gen, seed=s), radio).is_certified_feasible()
                   for s in range(20))
    ok = abs(loss - 126.63) <= 0.1 and worst <= 1e-12 and feasible
    record_criterion(8, ok, f"Hata(1 km) = {loss:.3f} dB, reduction identity worst rel. error {worst:.1e}, "
                            f"20 generated instances feasible: {feasible}")
    assert ok


def test_greedy_caveats(record_criterion):
    # rounding 0.9999 up at K=1000 makes the cheap facility look sufficient
    trap = Instance([0.001, 10.0], [1.0], [[0.9999], [1.0]])
    flagged = not greedy_solve(trap, scale=1000).original_feasible
    rng = np.random.default_rng(12)
    infeasible_fits = 0
    for k in range(200):
        inst = random_instance(rng, int(rng.integers(1, 11)), int(rng.integers(1, 6)), integer=k % 2 == 0)
        fit = fit_greedy_minimal(greedy_solve(inst), inst)
        infeasible_fits += bool(np.any(dual_feasibility_slack(inst, fit.dual) < -1e-9))
    ok = flagged and infeasible_fits == 0
    record_criterion(9, ok, f"rounding-infeasible greedy flagged: {flagged}; Greedy+ duals infeasible on "
                            f"{infeasible_fits}/200 instances")
    assert ok
