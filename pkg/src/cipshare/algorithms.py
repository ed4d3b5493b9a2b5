"""Constructive CIP algorithms that also produce cost shares.

* :func:`min_cost_knapsack_pd` -- single-user primal-dual for min-cost knapsack
  (2-approximation relative to its own KC dual).
* :func:`multi_user_primal_dual` -- all unsatisfied users raise their duals
  together; used as the PrimalDual benchmark.
* :func:`greedy_solve` with :func:`greedy_fit_fixed` / :func:`greedy_fit_minimal`
  -- price-per-coverage greedy with dual fitting.
* :func:`cross_monotone_mechanism` -- independent per-user primal-dual runs,
  duals divided by the column sparsity of the served set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import (
    FEAS_TOL,
    CostShares,
    DualSolution,
    Instance,
    InfeasibleInstance,
    InfeasibleUser,
    Selection,
    ZeroCostOverload,
    dual_loads,
    induce_cost_shares,
    is_dual_feasible,
    is_feasible,
    sparsity,
)

TIE_TOL = 1e-12


@dataclass
class PDTrace:
    steps: list[tuple[frozenset, float, int]]
    selection: Selection
    dual: DualSolution

    def dump_records(self):
        return [(S, i, v) for S, v, i in self.steps]


def _pick_min(values: np.ndarray, mask: np.ndarray) -> int:
    """Lowest index among masked entries within TIE_TOL of the minimum."""
    cand = np.flatnonzero(mask)
    best = values[cand].min()
    scale = max(1.0, abs(best))
    return int(cand[values[cand] <= best + TIE_TOL * scale][0])


def _primal_dual(inst: Instance, users: list[int]) -> PDTrace:
    a = inst.contributions
    c = inst.facility_costs
    opened: list[int] = []
    in_X = np.zeros(inst.n, dtype=bool)
    load = np.zeros(inst.n)
    covered = np.zeros(inst.m)
    duals: dict[tuple[int, frozenset], float] = {}
    steps = []
    users = np.asarray(sorted(set(users)), dtype=int)
    req = inst.requirements

    while True:
        resid = np.maximum(req[users] - covered[users], 0.0)
        active = users[resid > FEAS_TOL]
        if active.size == 0:
            break
        rj = np.maximum(req[active] - covered[active], 0.0)
        clipped = np.minimum(a[:, active], rj[None, :])
        clipped[in_X, :] = 0.0
        rate = clipped.sum(axis=1)
        growable = (~in_X) & (rate > 0)
        if not growable.any():
            raise InfeasibleInstance(f"users {active.tolist()} cannot reach their requirement")
        slack = np.maximum(c - load, 0.0)
        t = np.full(inst.n, np.inf)
        t[growable] = slack[growable] / rate[growable]
        i = _pick_min(t, growable)
        delta = float(t[i])
        S = frozenset(opened)
        if delta > 0:
            for j in active.tolist():
                key = (j, S)
                duals[key] = duals.get(key, 0.0) + delta
            load += delta * rate
        load[i] = c[i]
        steps.append((S, delta, i))
        opened.append(i)
        in_X[i] = True
        covered += a[i]
    return PDTrace(steps, Selection.of(inst, opened), DualSolution._trusted(duals))


def min_cost_knapsack_pd(inst: Instance, j: int) -> tuple[Selection, DualSolution]:
    """Grow ``y_j^X`` for the current selection ``X`` until a facility is tight; open it; repeat."""
    trace = min_cost_knapsack_pd_trace(inst, j)
    return trace.selection, trace.dual


def min_cost_knapsack_pd_trace(inst: Instance, j: int) -> PDTrace:
    inst._check_user(j)
    if not inst.is_certified_feasible([j]):
        raise InfeasibleUser(f"user {j} cannot be covered even with every facility open")
    return _primal_dual(inst, [j])


def multi_user_primal_dual(inst: Instance, U: Iterable[int] | None = None) -> tuple[Selection, DualSolution]:
    trace = multi_user_primal_dual_trace(inst, U)
    return trace.selection, trace.dual


def multi_user_primal_dual_trace(inst: Instance, U: Iterable[int] | None = None) -> PDTrace:
    users = list(inst.users if U is None else U)
    inst.require_feasible(users)
    return _primal_dual(inst, users)


# -- greedy with dual fitting ------------------------------------------------

def integer_scale(inst: Instance, scale: int) -> tuple[np.ndarray, np.ndarray]:
    """Contributions rounded up and requirements rounded down after multiplying by ``scale``."""
    a = np.ceil(inst.contributions * scale - 1e-9).astype(np.int64)
    r = np.floor(inst.requirements * scale + 1e-9).astype(np.int64)
    return np.maximum(a, 0), r


@dataclass
class GreedyTrace:
    steps: list[tuple[frozenset, int, float]]
    raw_dual: DualSolution
    selection: Selection
    users: frozenset
    scale: int
    rounded_feasible: bool
    original_feasible: bool

    def dump_records(self):
        return [(S, i, p) for S, i, p in self.steps]


def greedy_solve(inst: Instance, U: Iterable[int] | None = None, scale: int = 1000) -> GreedyTrace:
    """Open the facility with the lowest cost per unit of residual coverage until covered.

    Runs on integer-scaled data.  The raw dual charges each step's cost to the
    users it covers in proportion to their clipped coverage, expressed in
    original units (so it is generally not KC-DP feasible).
    """
    users = np.asarray(sorted(set(inst.users if U is None else U)), dtype=int)
    inst.require_feasible(users.tolist())
    ai, ri = integer_scale(inst, scale)
    ai, ri = ai[:, users], ri[users]
    if np.any(ai.sum(axis=0) < ri):
        raise InfeasibleInstance("integer-scaled instance is infeasible")
    c = inst.facility_costs
    in_S = np.zeros(inst.n, dtype=bool)
    opened: list[int] = []
    covered = np.zeros(users.size, dtype=np.int64)
    steps = []
    duals: dict[tuple[int, frozenset], float] = {}
    while True:
        resid = np.maximum(ri - covered, 0)
        if not resid.any():
            break
        clipped = np.minimum(ai, resid[None, :])
        clipped[in_S, :] = 0
        eff = clipped.sum(axis=1)
        ok = (~in_S) & (eff > 0)
        if not ok.any():
            raise InfeasibleInstance("greedy stalled before covering every user")
        price = np.full(inst.n, np.inf)
        price[ok] = c[ok] / eff[ok]
        i = _pick_min(price, ok)
        p = float(price[i])
        S = frozenset(opened)
        if p > 0:
            for col in np.flatnonzero(clipped[i]).tolist():
                j = int(users[col])
                duals[(j, S)] = float(scale * p * clipped[i, col] / resid[col])
        steps.append((S, i, p))
        opened.append(i)
        in_S[i] = True
        covered += ai[i]
    sel = Selection.of(inst, opened)
    return GreedyTrace(
        steps=steps,
        raw_dual=DualSolution._trusted(duals),
        selection=sel,
        users=frozenset(users.tolist()),
        scale=scale,
        rounded_feasible=True,
        original_feasible=is_feasible(inst, sel, users=users.tolist()),
    )


@dataclass
class GreedyFit:
    dual: DualSolution
    divisor: float
    fallback: bool
    shares: CostShares = field(repr=False)


def minimal_divisor(inst: Instance, y: DualSolution, tol: float = FEAS_TOL) -> float:
    """Smallest ``lam >= 1`` with ``y / lam`` KC-DP feasible."""
    load = dual_loads(inst, y)
    c = inst.facility_costs
    zero = c <= 0
    if np.any(load[zero] > tol):
        i = int(np.flatnonzero(zero & (load > tol))[0])
        raise ZeroCostOverload(f"zero-cost facility {i} carries dual load {load[i]:.3g}")
    ratios = load[~zero] / c[~zero]
    lam = max(1.0, float(ratios.max(initial=0.0)))
    # guard against the division landing a hair above c_i
    return lam * (1.0 + 1e-12) if lam > 1.0 else lam


def fit_greedy_fixed(trace: GreedyTrace, inst: Instance) -> GreedyFit:
    divisor = math.log(max(inst.n, 2))
    y = trace.raw_dual.scaled(1.0 / divisor)
    if is_dual_feasible(inst, y):
        shares = induce_cost_shares(inst, y, trace.users, method="greedy")
        return GreedyFit(y, divisor, False, shares)
    lam = minimal_divisor(inst, trace.raw_dual)
    y = trace.raw_dual.scaled(1.0 / lam)
    shares = induce_cost_shares(inst, y, trace.users, method="greedy:fallback-minimal")
    return GreedyFit(y, lam, True, shares)


def fit_greedy_minimal(trace: GreedyTrace, inst: Instance) -> GreedyFit:
    lam = minimal_divisor(inst, trace.raw_dual)
    y = trace.raw_dual.scaled(1.0 / lam)
    return GreedyFit(y, lam, False, induce_cost_shares(inst, y, trace.users, method="greedy+"))


def greedy_fit_fixed(trace: GreedyTrace, inst: Instance) -> CostShares:
    """Scale the raw greedy dual by ``1/ln(max(n, 2))``; fall back to minimal fitting if needed."""
    return fit_greedy_fixed(trace, inst).shares


def greedy_fit_minimal(trace: GreedyTrace, inst: Instance) -> CostShares:
    """Scale the raw greedy dual down only as far as KC-DP feasibility requires."""
    return fit_greedy_minimal(trace, inst).shares


# -- cross-monotone mechanism ------------------------------------------------

@dataclass
class MechanismResult:
    selection: Selection
    shares: CostShares
    user_duals: dict[int, DualSolution]
    delta: int

    @property
    def dual(self) -> DualSolution:
        out = DualSolution()
        for y in self.user_duals.values():
            out = out.merged(y)
        return out


def cross_monotone_mechanism(inst: Instance, U: Iterable[int] | None = None) -> MechanismResult:
    """Serve ``U`` by the union of per-user knapsack primal-dual selections.

    Each user's dual is divided by ``Delta(U)``, the most users of ``U`` any one
    facility serves, which keeps the combined dual feasible and makes every
    share nonincreasing as ``U`` grows.
    """
    users = sorted(set(inst.users if U is None else U))
    for j in users:
        if not inst.is_certified_feasible([j]):
            raise InfeasibleUser(f"user {j} cannot be covered even with every facility open")
    if not users:
        return MechanismResult(Selection.of(inst, ()), CostShares(np.zeros(inst.m), frozenset(), "mechanism"), {}, 0)
    delta = sparsity(inst, users).delta_restricted
    opened: set[int] = set()
    per_user: dict[int, DualSolution] = {}
    for j in users:
        sel_j, y_j = min_cost_knapsack_pd(inst, j)
        opened |= sel_j.opened
        per_user[j] = y_j.scaled(1.0 / delta)
    combined = DualSolution()
    for y in per_user.values():
        combined = combined.merged(y)
    shares = induce_cost_shares(inst, combined, users, method="mechanism")
    return MechanismResult(Selection.of(inst, opened), shares, per_user, delta)
