"""Knapsack-cover LP by cutting planes, with its dual read off the master.

The master starts from the plain covering rows ``(j, {})`` and grows by the
most violated knapsack-cover inequality of each user.  Every master dual is
feasible for the full KC dual (it is a KC-DP solution supported on the active
cuts), so even an early stop yields valid core cost shares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .core import (
    CIPError,
    DualSolution,
    Instance,
    residual_row,
)
from .simplex import PackingSimplex, UnboundedOrInfeasibleLP

VIOLATION_TOL = 1e-7
DEFAULT_SCALE = 1000
DP_BUDGET = 600
MAX_CUTS_PER_USER = 4
DP_CANDIDATES = 24
ENUM_LIMIT = 14


class ScaleOverflow(CIPError):
    pass


class IterationLimit(CIPError):
    pass


@dataclass
class Cut:
    user: int
    subset: frozenset
    rhs: float
    row: np.ndarray = field(repr=False)


@dataclass
class RestrictedMaster:
    inst: Instance
    users: list[int]
    cuts: list[Cut] = field(default_factory=list)
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = 0.0
    lp: PackingSimplex | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.lp is None:
            self.lp = PackingSimplex(self.inst.facility_costs)
        self._keys = {(c.user, c.subset) for c in self.cuts}
        for cut in self.cuts:
            self.lp.add_column(cut.row, cut.rhs)

    def add_cut(self, j: int, S: Iterable[int]) -> bool:
        S = frozenset(S)
        if (j, S) in self._keys:
            return False
        rS, row = residual_row(self.inst, j, S)
        if rS <= 0:
            return False
        self._keys.add((j, S))
        self.cuts.append(Cut(j, S, rS, row))
        self.lp.add_column(row, rS)
        return True

    def dual_solution(self) -> DualSolution:
        entries = {}
        for cut, v in zip(self.cuts, self.duals if self.duals is not None else []):
            if v > 0:
                entries[(cut.user, cut.subset)] = float(v)
        return DualSolution._trusted(entries)


def solve_restricted_master(master: RestrictedMaster, costs=None):
    """Optimal ``x`` and cut duals of ``min c.x`` over the active cuts, ``x >= 0``."""
    if not master.cuts:
        raise ValueError("restricted master has no active constraints")
    if costs is not None and not np.array_equal(np.asarray(costs, dtype=float), master.lp.c):
        raise ValueError("costs differ from the master's instance costs")
    y, x, obj = master.lp.solve()
    master.x, master.duals, master.objective = x, y, obj
    return x, y, obj


@dataclass
class SeparationResult:
    user: int
    subset: frozenset | None
    violation: float
    method: str
    candidates: list[tuple[frozenset, float]] = field(default_factory=list, repr=False)


def kc_violation(inst: Instance, j: int, S: Iterable[int], x) -> float:
    """``r_j^S - sum_{i not in S} a_ij^S x_i`` on the original data."""
    rS, row = residual_row(inst, j, S)
    return rS - math.fsum(row * np.asarray(x, dtype=float))


def _violations_of(inst: Instance, j: int, subsets: list[frozenset], x: np.ndarray) -> list[float]:
    a = inst.contributions[:, j]
    r = float(inst.requirements[j])
    out = []
    for S in subsets:
        idx = list(S)
        rS = max(r - math.fsum(a[idx]), 0.0)
        row = np.minimum(a, rS)
        row[idx] = 0.0
        out.append(rS - math.fsum(row * x))
    return out


def threshold_candidates(inst: Instance, j: int, x: np.ndarray) -> list[frozenset]:
    """Sets ``{i : x_i >= theta}`` restricted to facilities serving ``j``, one per distinct ``theta``."""
    a = inst.contributions[:, j]
    items = np.flatnonzero(a > 0)
    order = items[np.lexsort((-a[items], -x[items]))]
    out, acc = [frozenset()], []
    for k, i in enumerate(order):
        acc.append(int(i))
        if k + 1 == order.size or x[order[k + 1]] != x[i]:
            out.append(frozenset(acc))
    return out


def _rank(inst, j, subsets, x, tol):
    seen, uniq = set(), []
    for S in subsets:
        if S not in seen:
            seen.add(S)
            uniq.append(S)
    viol = _violations_of(inst, j, uniq, x)
    ranked = sorted(zip(uniq, viol), key=lambda t: (-t[1], len(t[0]), sorted(t[0])))
    return [(S, v) for S, v in ranked if v > tol]


def separate_heuristic(inst: Instance, j: int, x, tol: float = VIOLATION_TOL) -> SeparationResult:
    x = np.asarray(x, dtype=float)
    ranked = _rank(inst, j, threshold_candidates(inst, j, x), x, tol)
    if not ranked:
        return SeparationResult(j, None, 0.0, "none-found")
    S, v = ranked[0]
    return SeparationResult(j, S, v, "threshold", ranked)


def _knapsack_tables(weights_a: np.ndarray, xs: np.ndarray, R: int):
    """Min-cost table over (residual rho, exact scaled coverage s of S).

    ``D[rho, s]`` is the least ``sum_{i in T} min(a_i, rho) x_i`` over splits of
    the items into S (coverage exactly ``s``) and T.  One boolean table per item
    records whether the item went into S, for backtracking.
    """
    rho = np.arange(R + 1, dtype=float)
    D = np.full((R + 1, R), np.inf)
    D[:, 0] = 0.0
    took = []
    for ai, xi in zip(weights_a.tolist(), xs.tolist()):
        w = np.minimum(ai, rho) * xi
        new = D + w[:, None]
        t = np.zeros_like(D, dtype=bool)
        if ai < R:
            shifted = D[:, : R - ai]
            better = shifted < new[:, ai:]
            new[:, ai:][better] = shifted[better]
            t[:, ai:] = better
        took.append(t)
        D = new
    return D, took


def _enumerate_free(a: np.ndarray, r: float, free: np.ndarray, forced_cov: float, x: np.ndarray,
                    forced: list[int], n_candidates: int) -> list[frozenset]:
    """Score every split of the free facilities on the original data."""
    af, xf = a[free], x[free]
    masks = ((np.arange(1 << free.size)[:, None] >> np.arange(free.size)[None, :]) & 1).astype(bool)
    rS = np.maximum(r - forced_cov - masks @ af, 0.0)
    cost = (np.minimum(af[None, :], rS[:, None]) * xf[None, :] * ~masks).sum(axis=1)
    viol = np.where(rS > 0, rS - cost, -np.inf)
    order = np.argsort(-viol, kind="stable")[:n_candidates]
    return [frozenset(forced + free[masks[b]].tolist()) for b in order if np.isfinite(viol[b])]


def _dp_candidates(a: np.ndarray, r: float, free: np.ndarray, forced: list[int], x: np.ndarray,
                   scale: int, n_candidates: int) -> list[frozenset]:
    R = int(math.floor(scale * r + 1e-9))
    ai = np.ceil(a * scale - 1e-9).astype(np.int64)
    Rf = R - int(ai[forced].sum())
    if Rf <= 0 or not free.size:
        return []
    D, took = _knapsack_tables(ai[free], x[free], Rf)
    rhos = np.arange(1, Rf + 1)
    gain = rhos - D[rhos, Rf - rhos]
    finite = np.isfinite(gain)
    order = rhos[finite][np.argsort(-gain[finite], kind="stable")]
    out = []
    for rho in order[:n_candidates].tolist():
        s = Rf - rho
        S = list(forced)
        for k in range(free.size - 1, -1, -1):
            if took[k][rho, s]:
                S.append(int(free[k]))
                s -= int(ai[free[k]])
        out.append(frozenset(S))
    return out


def separate_user(inst: Instance, j: int, x, scale: int = DEFAULT_SCALE,
                  tol: float = VIOLATION_TOL, max_states: int | None = 10_000,
                  n_candidates: int = DP_CANDIDATES, method: str = "auto",
                  enum_limit: int = ENUM_LIMIT) -> SeparationResult:
    """Most violated knapsack-cover inequality of user ``j`` at point ``x``.

    Facilities with ``x_i >= 1`` always go into the built set ``S`` (doing so
    never lowers the violation); facilities not serving ``j`` never matter.
    The remaining "free" facilities are split by

    * ``"dp"``: data scaled by ``scale`` (contributions rounded up,
      requirement down); for every residual ``rho`` a min-cost knapsack picks
      the set whose scaled coverage leaves exactly ``rho``.
    * ``"enumerate"``: every split of the free facilities, on original data.
    * ``"auto"``: enumerate when at most ``enum_limit`` facilities are free.

    Candidate sets are always re-scored on the original data, so the returned
    inequality and its violation are exact even when rounding makes the
    search approximate.
    """
    inst._check_user(j)
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12):
        raise ValueError("separation point must be nonnegative")
    x = np.maximum(x, 0.0)
    a = inst.contributions[:, j]
    r = float(inst.requirements[j])
    serving = np.flatnonzero(a > 0)
    forced = [int(i) for i in serving if x[i] >= 1.0]
    free = np.array([i for i in serving if x[i] < 1.0], dtype=int)
    if method == "auto":
        method = "enumerate" if free.size <= enum_limit else "dp"
    candidates = [frozenset(forced)]
    if method == "enumerate":
        forced_cov = math.fsum(a[forced])
        candidates += _enumerate_free(a, r, free, forced_cov, x, forced, n_candidates)
        tag = "enumerated"
    elif method == "dp":
        R = int(math.floor(scale * r + 1e-9))
        if max_states is not None and R > max_states:
            raise ScaleOverflow(f"scaled requirement {R} exceeds DP bound {max_states}")
        candidates += _dp_candidates(a, r, free, forced, x, scale, n_candidates)
        tag = "dp-exact-on-rounded"
    else:
        raise ValueError(f"unknown separation method {method!r}")
    candidates += threshold_candidates(inst, j, x)
    ranked = _rank(inst, j, candidates, x, tol)
    if not ranked:
        return SeparationResult(j, None, 0.0, "none-found")
    S, v = ranked[0]
    return SeparationResult(j, S, v, tag, ranked)


@dataclass
class KCLPResult:
    x: np.ndarray
    dual: DualSolution
    objective: float
    rounds: int
    converged: bool
    n_cuts: int
    history: list[float] = field(default_factory=list, repr=False)
    cut_log: list[tuple[int, int, frozenset, float]] = field(default_factory=list, repr=False)


def _user_scale(inst: Instance, j: int, scale: int, budget: int) -> int:
    r = float(inst.requirements[j])
    return max(1, min(scale, int(budget / r)))


def column_generation_solve(inst: Instance, U: Iterable[int] | None = None, tol: float = VIOLATION_TOL,
                            scale: int = DEFAULT_SCALE, max_rounds: int | None = None,
                            dp_budget: int = DP_BUDGET, strict: bool = False,
                            separation: str = "auto", cut_log_path=None) -> KCLPResult:
    """Cutting-plane solve of the KC-LP restricted to users ``U``.

    Each round prices cheap threshold cuts first and falls back to the
    full oracle (:func:`separate_user` with method ``separation``) only when
    those find nothing.  The DP for user ``j`` uses ``min(scale, dp_budget / r_j)``
    as its integer scale so the table stays desk-sized.  With ``strict=True`` hitting ``max_rounds`` raises
    :class:`IterationLimit`; otherwise the best dual so far is returned with
    ``converged=False``.
    """
    users = sorted(set(inst.users if U is None else U))
    inst.require_feasible(users)
    if max_rounds is None:
        max_rounds = 10 * inst.n * max(len(users), 1)
    master = RestrictedMaster(inst, users)
    for j in users:
        master.add_cut(j, ())
    history, log = [], []
    converged = False
    rounds = 0
    if not master.cuts:
        return KCLPResult(np.zeros(inst.n), DualSolution(), 0.0, 0, True, 0)
    while rounds < max_rounds:
        rounds += 1
        x, _, obj = solve_restricted_master(master)
        history.append(obj)
        found = _add_cuts(master, users, x, tol, rounds, log, lambda j: separate_heuristic(inst, j, x, tol))
        if not found:
            found = _add_cuts(
                master, users, x, tol, rounds, log,
                lambda j: separate_user(inst, j, x, _user_scale(inst, j, scale, dp_budget), tol, None,
                                        method=separation),
            )
        if not found:
            converged = True
            break
    if not converged:
        if strict:
            raise IterationLimit(f"no convergence after {max_rounds} rounds")
        x, _, obj = solve_restricted_master(master)
        history.append(obj)
    if cut_log_path is not None:
        write_cut_log(log, cut_log_path)
    return KCLPResult(master.x, master.dual_solution(), master.objective, rounds, converged,
                      len(master.cuts), history, log)


def _add_cuts(master, users, x, tol, rnd, log, separate) -> int:
    added = 0
    for j in users:
        res = separate(j)
        for S, v in res.candidates[:MAX_CUTS_PER_USER]:
            if master.add_cut(j, S):
                log.append((rnd, j, S, v))
                added += 1
    return added


def write_cut_log(log, path) -> None:
    with open(path, "w") as fh:
        for rnd, j, S, v in log:
            fh.write(f"({rnd}, {j}, {{{','.join(map(str, sorted(S)))}}}, {v!r})\n")


def naive_lp(inst: Instance, U: Iterable[int] | None = None):
    """``min c.x  s.t.  A^T x >= r, 0 <= x <= 1`` over users ``U``; returns ``(value, x)``."""
    users = sorted(set(inst.users if U is None else U))
    if not users:
        return 0.0, np.zeros(inst.n)
    A = inst.contributions[:, users].T
    res = linprog(inst.facility_costs, A_ub=-A, b_ub=-inst.requirements[users],
                  bounds=[(0.0, 1.0)] * inst.n, method="highs")
    if res.status != 0:
        raise UnboundedOrInfeasibleLP(f"naive LP failed: {res.message}")
    return float(res.fun), res.x


def naive_lp_value(inst: Instance, U: Iterable[int] | None = None) -> float:
    return naive_lp(inst, U)[0]
