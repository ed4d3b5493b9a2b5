"""Exact desk-scale oracles: IP optimum, stand-alone coalition costs, the
fully enumerated KC-LP, core audits and integrality gaps.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .core import (
    CORE_TOL,
    FEAS_TOL,
    CostShares,
    DualSolution,
    Instance,
    InfeasibleInstance,
    Selection,
    SizeCapExceeded,
)
from .simplex import UnboundedOrInfeasibleLP

IP_CAP = 25
ENUM_CAP = 20
KCLP_CAP = 15
AUDIT_CAP = 12


def _users(inst: Instance, U) -> list[int]:
    return sorted(set(inst.users if U is None else U))


def _better(cost, opened, best_cost, best_set) -> bool:
    if best_set is None:
        return True
    gap = cost - best_cost
    eps = 1e-12 * max(1.0, abs(best_cost))
    if gap < -eps:
        return True
    return abs(gap) <= eps and tuple(sorted(opened)) < tuple(sorted(best_set))


def _mask_matrix(n: int) -> np.ndarray:
    """Row ``b`` holds the bits of ``b``; facility ``i`` is bit ``i``."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def solve_ip_enumerate(inst: Instance, U: Iterable[int] | None = None, cap: int = ENUM_CAP) -> Selection:
    """Brute force over all ``2^n`` selections."""
    if inst.n > cap:
        raise SizeCapExceeded(f"enumeration needs n <= {cap}, got {inst.n}")
    users = _users(inst, U)
    inst.require_feasible(users)
    masks = _mask_matrix(inst.n)
    cov = masks.astype(float) @ inst.contributions[:, users]
    ok = np.all(cov >= inst.requirements[users] - FEAS_TOL, axis=1)
    costs = masks.astype(float) @ inst.facility_costs
    best_cost, best_set = math.inf, None
    for b in np.flatnonzero(ok):
        opened = np.flatnonzero(masks[b]).tolist()
        cost = math.fsum(inst.facility_costs[opened])
        if costs[b] > best_cost + 1e-9:
            continue
        if _better(cost, opened, best_cost, best_set):
            best_cost, best_set = cost, opened
    return Selection.of(inst, best_set)


def _node_lp(inst: Instance, users: list[int], ones: frozenset, zeros: frozenset):
    """Coefficient-tightened LP relaxation at a B&B node.

    Returns ``(bound, x)`` with ``x`` over all facilities, or ``None`` if the
    node cannot be completed.
    """
    a = inst.contributions
    base = math.fsum(inst.facility_costs[list(ones)])
    resid = inst.requirements[users] - (a[list(ones)][:, users].sum(axis=0) if ones else 0.0)
    live = resid > FEAS_TOL
    x = np.zeros(inst.n)
    x[list(ones)] = 1.0
    if not live.any():
        return base, x
    free = [i for i in range(inst.n) if i not in ones and i not in zeros]
    cols = [u for u, keep in zip(users, live) if keep]
    r = resid[live]
    if not free:
        return None
    A = np.minimum(a[np.ix_(free, cols)], r[None, :])
    if np.any(A.sum(axis=0) < r - FEAS_TOL):
        return None
    res = linprog(inst.facility_costs[free], A_ub=-A.T, b_ub=-r, bounds=[(0.0, 1.0)] * len(free),
                  method="highs")
    if res.status == 2:
        return None
    if res.status != 0:
        raise UnboundedOrInfeasibleLP(f"node LP failed: {res.message}")
    x[free] = res.x
    return base + float(res.fun), x


def _repair(inst: Instance, users: list[int], opened: set[int]) -> set[int]:
    """Drop redundant facilities, most expensive first."""
    opened = set(opened)
    a = inst.contributions[:, users]
    need = inst.requirements[users] - FEAS_TOL
    cov = a[list(opened)].sum(axis=0) if opened else np.zeros(len(users))
    for i in sorted(opened, key=lambda i: (-inst.facility_costs[i], -i)):
        if np.all(cov - a[i] >= need):
            opened.discard(i)
            cov = cov - a[i]
    return opened


def solve_ip_exact(inst: Instance, U: Iterable[int] | None = None, cap: int = IP_CAP,
                   node_limit: int = 2_000_000) -> Selection:
    """Minimum-cost feasible selection for users ``U`` by best-bound branch and bound.

    Bounds come from the LP relaxation (``0 <= x <= 1``) with each row's
    coefficients clipped to the node's residual requirement.
    """
    if inst.n > cap:
        raise SizeCapExceeded(f"exact IP capped at n <= {cap}, got {inst.n}")
    users = _users(inst, U)
    inst.require_feasible(users)
    if not users:
        return Selection.of(inst, ())
    best_cost, best_set = math.inf, None
    counter = itertools.count()
    root = _node_lp(inst, users, frozenset(), frozenset())
    if root is None:
        raise InfeasibleInstance("root relaxation infeasible")
    heap = [(root[0], next(counter), frozenset(), frozenset(), root[1])]
    nodes = 0
    while heap:
        bound, _, ones, zeros, x = heapq.heappop(heap)
        if bound > best_cost + 1e-9:
            break
        nodes += 1
        if nodes > node_limit:
            raise SizeCapExceeded(f"branch and bound exceeded {node_limit} nodes")
        frac = [(abs(x[i] - 0.5), i) for i in range(inst.n)
                if i not in ones and i not in zeros and FEAS_TOL < x[i] < 1 - FEAS_TOL]
        # rounding up the relaxation is always feasible; use it as an incumbent
        rounded = _repair(inst, users, {i for i in range(inst.n) if x[i] > FEAS_TOL} | set(ones))
        cost = math.fsum(inst.facility_costs[sorted(rounded)])
        if _better(cost, rounded, best_cost, best_set):
            best_cost, best_set = cost, sorted(rounded)
        if not frac:
            continue
        _, i = min(frac)
        for child_ones, child_zeros in ((ones | {i}, zeros), (ones, zeros | {i})):
            sol = _node_lp(inst, users, child_ones, child_zeros)
            if sol is not None and sol[0] <= best_cost + 1e-9:
                heapq.heappush(heap, (sol[0], next(counter), child_ones, child_zeros, sol[1]))
    return Selection.of(inst, best_set)


def all_subset_costs(inst: Instance, U: Iterable[int] | None = None) -> dict[frozenset, float]:
    """``c*_J`` for every ``J`` subset of ``U`` (including the empty set)."""
    users = _users(inst, U)
    if len(users) > AUDIT_CAP:
        raise SizeCapExceeded(f"coalition enumeration needs |U| <= {AUDIT_CAP}")
    k = len(users)
    if inst.n <= ENUM_CAP:
        masks = _mask_matrix(inst.n).astype(float)
        cov = masks @ inst.contributions[:, users]
        sat = cov >= inst.requirements[users] - FEAS_TOL
        sat_bits = (sat.astype(np.int64) << np.arange(k)).sum(axis=1)
        costs = masks @ inst.facility_costs
        best = np.full(1 << k, np.inf)
        np.minimum.at(best, sat_bits, costs)
        # best[T] now covers exactly T; take minima over supersets
        for b in range(k):
            bit = 1 << b
            idx = np.arange(1 << k)
            lo = idx[(idx & bit) == 0]
            best[lo] = np.minimum(best[lo], best[lo | bit])
        out = {}
        for mask in range(1 << k):
            J = frozenset(users[b] for b in range(k) if mask >> b & 1)
            out[J] = 0.0 if not J else float(best[mask])
        return out
    return {
        frozenset(J): subset_cost(inst, J)
        for r in range(k + 1) for J in itertools.combinations(users, r)
    }


def subset_cost(inst: Instance, J: Iterable[int], cap: int = IP_CAP) -> float:
    """Minimum cost of serving coalition ``J`` on its own."""
    J = sorted(set(J))
    if not J:
        return 0.0
    return solve_ip_exact(inst, J, cap=cap).cost


@dataclass
class CoreAudit:
    records: list[tuple[frozenset, float, float, float]]
    worst: tuple[frozenset, float, float, float] | None
    passed: bool
    tol: float

    def lines(self) -> list[str]:
        out = []
        for J, cJ, paid, slack in self.records:
            out.append(f"{{{','.join(map(str, sorted(J)))}}}\t{cJ!r}\t{paid!r}\t{slack!r}")
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# coalition\tstandalone_cost\tpaid\tslack\n")
            for line in self.lines():
                fh.write(line + "\n")


def verify_core(inst: Instance, shares: CostShares, tol: float = CORE_TOL,
                cap: int = AUDIT_CAP, costs: dict | None = None) -> CoreAudit:
    """Check ``sum_{j in J} xi_j <= c*_J`` for every nonempty ``J`` of the share's users."""
    users = sorted(shares.user_set)
    if len(users) > cap:
        raise SizeCapExceeded(f"core audit enumerates 2^|U| coalitions; |U|={len(users)} > {cap}")
    if costs is None:
        costs = all_subset_costs(inst, users)
    records = []
    for mask in range(1, 1 << len(users)):
        J = frozenset(users[b] for b in range(len(users)) if mask >> b & 1)
        members = sorted(J)
        paid = math.fsum(shares.shares[members])
        cJ = costs[J]
        records.append((J, cJ, paid, cJ - paid))
    worst = min(records, key=lambda r: r[3]) if records else None
    passed = worst is None or worst[3] >= -tol
    return CoreAudit(records, worst, passed, tol)


def enumerate_kc_rows(inst: Instance, U: Iterable[int] | None = None, cap: int = KCLP_CAP):
    """All distinct nontrivial knapsack-cover rows: ``(keys, rows, rhs)``."""
    if inst.n > cap:
        raise SizeCapExceeded(f"full KC enumeration needs n <= {cap}, got {inst.n}")
    users = _users(inst, U)
    masks = _mask_matrix(inst.n)
    keys, rows, rhs = [], [], []
    for j in users:
        a = inst.contributions[:, j]
        rS = np.maximum(inst.requirements[j] - masks.astype(float) @ a, 0.0)
        R = np.minimum(a[None, :], rS[:, None])
        R[masks] = 0.0
        live = np.flatnonzero(rS > 0)
        _, first = np.unique(np.column_stack([R[live], rS[live]]), axis=0, return_index=True)
        for b in live[np.sort(first)]:
            keys.append((j, frozenset(np.flatnonzero(masks[b]).tolist())))
            rows.append(R[b])
            rhs.append(rS[b])
    return keys, np.array(rows).reshape(len(rows), inst.n), np.array(rhs)


def kc_lp_exact(inst: Instance, U: Iterable[int] | None = None, cap: int = KCLP_CAP):
    """KC-LP over every knapsack-cover inequality; returns ``(objective, x, dual)``."""
    users = _users(inst, U)
    inst.require_feasible(users)
    keys, rows, rhs = enumerate_kc_rows(inst, users, cap)
    if not keys:
        return 0.0, np.zeros(inst.n), DualSolution()
    res = linprog(inst.facility_costs, A_ub=-rows, b_ub=-rhs, bounds=[(0.0, None)] * inst.n,
                  method="highs")
    if res.status != 0:
        raise UnboundedOrInfeasibleLP(f"enumerated KC-LP failed: {res.message}")
    y = np.maximum(-res.ineqlin.marginals, 0.0)
    dual = DualSolution._trusted({k: float(v) for k, v in zip(keys, y) if v > 0})
    return float(res.fun), res.x, dual


def integrality_gap(inst: Instance, U: Iterable[int] | None = None, ip_value: float | None = None,
                    kc_value: float | None = None) -> tuple[float, float]:
    """``(IP / naive LP, IP / KC-LP)``."""
    from .kclp import column_generation_solve, naive_lp_value

    users = _users(inst, U)
    if ip_value is None:
        ip_value = solve_ip_exact(inst, users).cost
    if kc_value is None:
        if inst.n <= KCLP_CAP:
            kc_value = kc_lp_exact(inst, users)[0]
        else:
            kc_value = column_generation_solve(inst, users).objective
    naive = naive_lp_value(inst, users)
    return _ratio(ip_value, naive), _ratio(ip_value, kc_value)


def _ratio(num: float, den: float) -> float:
    if den <= 0:
        return 1.0 if num <= 0 else math.inf
    return num / den
