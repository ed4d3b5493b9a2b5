"""Covering integer program data model, knapsack-cover residual arithmetic and
dual-induced cost shares.

An instance has ``n`` facilities (rows of the contribution matrix) and ``m``
users (columns).  Facility subsets are passed around as ``frozenset`` of
indices; dual solutions are sparse maps keyed by ``(user, subset)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

FEAS_TOL = 1e-9
CORE_TOL = 1e-6


class CIPError(Exception):
    """Base class for errors raised by this package."""


class InvalidInstance(CIPError, ValueError):
    pass


class InfeasibleInstance(CIPError):
    pass


class InfeasibleUser(InfeasibleInstance):
    pass


class InfeasibleDual(CIPError):
    pass


class ZeroCostSolution(CIPError, ZeroDivisionError):
    pass


class ZeroCostOverload(CIPError):
    pass


class SizeCapExceeded(CIPError):
    pass


def _freeze(S: Iterable[int]) -> frozenset[int]:
    return S if isinstance(S, frozenset) else frozenset(int(i) for i in S)


@dataclass(frozen=True, eq=False)
class Instance:
    """A CIP: ``min c.x  s.t.  A^T x >= r, x binary``.

    ``contributions[i, j]`` is the coverage facility ``i`` gives user ``j``.
    """

    facility_costs: np.ndarray
    requirements: np.ndarray
    contributions: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.facility_costs, dtype=float).reshape(-1)
        r = np.array(self.requirements, dtype=float).reshape(-1)
        a = np.array(self.contributions, dtype=float)
        if a.ndim != 2 or a.shape != (c.size, r.size):
            raise InvalidInstance(
                f"contributions must be {c.size}x{r.size}, got shape {a.shape}"
            )
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r)) and np.all(np.isfinite(a))):
            raise InvalidInstance("instance data must be finite")
        if np.any(c < 0):
            raise InvalidInstance("facility costs must be nonnegative")
        if np.any(r <= 0):
            raise InvalidInstance("requirements must be positive")
        if np.any(a < 0):
            raise InvalidInstance("contributions must be nonnegative")
        for arr in (c, r, a):
            arr.setflags(write=False)
        object.__setattr__(self, "facility_costs", c)
        object.__setattr__(self, "requirements", r)
        object.__setattr__(self, "contributions", a)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.facility_costs.size

    @property
    def m(self) -> int:
        return self.requirements.size

    @property
    def users(self) -> range:
        return range(self.m)

    def is_certified_feasible(self, users: Iterable[int] | None = None, tol: float = FEAS_TOL) -> bool:
        """True if opening every facility covers every user in ``users``."""
        cols = list(self.users if users is None else users)
        total = self.contributions[:, cols].sum(axis=0)
        return bool(np.all(total >= self.requirements[cols] - tol))

    def require_feasible(self, users: Iterable[int] | None = None, tol: float = FEAS_TOL) -> None:
        cols = list(self.users if users is None else users)
        total = self.contributions[:, cols].sum(axis=0)
        bad = [j for j, t in zip(cols, total) if t < self.requirements[j] - tol]
        if bad:
            raise InfeasibleInstance(f"users {bad} cannot be covered even with every facility open")

    def restrict_users(self, users: Iterable[int]) -> "Instance":
        cols = sorted(set(users))
        return Instance(self.facility_costs, self.requirements[cols], self.contributions[:, cols], self.meta)

    def _check_user(self, j: int) -> None:
        if not 0 <= j < self.m:
            raise IndexError(f"user index {j} out of range [0, {self.m})")

    def _check_subset(self, S: Iterable[int]) -> None:
        for i in S:
            if not 0 <= i < self.n:
                raise IndexError(f"facility index {i} out of range [0, {self.n})")


@dataclass(frozen=True)
class Selection:
    opened: frozenset[int]
    cost: float

    @classmethod
    def of(cls, inst: Instance, opened: Iterable[int]) -> "Selection":
        opened = _freeze(opened)
        inst._check_subset(opened)
        cost = math.fsum(float(inst.facility_costs[i]) for i in opened)
        return cls(opened, cost)

    def indices(self) -> list[int]:
        return sorted(self.opened)


class DualSolution:
    """Sparse nonnegative KC-DP solution ``{(j, S): y_j^S}``."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[tuple[int, Iterable[int]], float] | None = None):
        store: dict[tuple[int, frozenset[int]], float] = {}
        for (j, S), v in (entries or {}).items():
            key = (int(j), _freeze(S))
            if key in store:
                raise ValueError(f"duplicate dual key {key}")
            v = float(v)
            if not v >= 0 or not math.isfinite(v):
                raise ValueError(f"dual value for {key} must be finite and nonnegative, got {v}")
            if v > 0:
                store[key] = v
        self._entries = store

    @classmethod
    def _trusted(cls, store: dict) -> "DualSolution":
        y = cls.__new__(cls)
        y._entries = store
        return y

    def items(self):
        return self._entries.items()

    def __getitem__(self, key) -> float:
        j, S = key
        return self._entries.get((int(j), _freeze(S)), 0.0)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def support_size(self) -> int:
        return len(self._entries)

    def users(self) -> set[int]:
        return {j for j, _ in self._entries}

    def scaled(self, factor: float) -> "DualSolution":
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return DualSolution._trusted({k: v * factor for k, v in self._entries.items() if v * factor > 0})

    def restricted(self, users: Iterable[int]) -> "DualSolution":
        keep = set(users)
        return DualSolution._trusted({k: v for k, v in self._entries.items() if k[0] in keep})

    def merged(self, other: "DualSolution") -> "DualSolution":
        store = dict(self._entries)
        for k, v in other.items():
            store[k] = store.get(k, 0.0) + v
        return DualSolution._trusted(store)

    def __repr__(self) -> str:
        return f"DualSolution(support={len(self)})"


@dataclass(frozen=True)
class CostShares:
    shares: np.ndarray
    user_set: frozenset[int]
    method: str = ""

    def __post_init__(self):
        xi = np.array(self.shares, dtype=float).reshape(-1)
        if np.any(xi < 0):
            raise ValueError("cost shares must be nonnegative")
        users = _freeze(self.user_set)
        outside = [j for j in range(xi.size) if j not in users and xi[j] != 0.0]
        if outside:
            raise ValueError(f"users {outside} are outside user_set but carry shares")
        xi.setflags(write=False)
        object.__setattr__(self, "shares", xi)
        object.__setattr__(self, "user_set", users)

    @property
    def total(self) -> float:
        return math.fsum(self.shares)


@dataclass(frozen=True)
class SparsityStats:
    delta: int
    gamma: int
    delta_restricted: int | None = None
    degenerate: bool = False


def residual_requirement(inst: Instance, j: int, S: Iterable[int]) -> float:
    """``max(r_j - sum_{i in S} a_ij, 0)``."""
    inst._check_user(j)
    S = _freeze(S)
    inst._check_subset(S)
    covered = math.fsum(float(inst.contributions[i, j]) for i in S)
    return max(float(inst.requirements[j]) - covered, 0.0)


def residual_contribution(inst: Instance, i: int, j: int, S: Iterable[int]) -> float:
    S = _freeze(S)
    if not 0 <= i < inst.n:
        raise IndexError(f"facility index {i} out of range [0, {inst.n})")
    rS = residual_requirement(inst, j, S)
    if i in S:
        return 0.0
    return min(float(inst.contributions[i, j]), rS)


def residual_row(inst: Instance, j: int, S: Iterable[int]) -> tuple[float, np.ndarray]:
    """Residual requirement and the clipped column ``(a_ij^S)_i`` for one KC inequality."""
    S = _freeze(S)
    rS = residual_requirement(inst, j, S)
    row = np.minimum(inst.contributions[:, j], rS)
    if S:
        row[list(S)] = 0.0
    return rS, row


def coverage(inst: Instance, opened: Iterable[int]) -> np.ndarray:
    idx = sorted(_freeze(opened))
    if not idx:
        return np.zeros(inst.m)
    return inst.contributions[idx, :].sum(axis=0)


def is_feasible(inst: Instance, sel: Selection | Iterable[int], tol: float = FEAS_TOL,
                users: Iterable[int] | None = None) -> bool:
    opened = sel.opened if isinstance(sel, Selection) else _freeze(sel)
    cols = list(inst.users if users is None else users)
    cov = coverage(inst, opened)
    return bool(np.all(cov[cols] >= inst.requirements[cols] - tol))


def sparsity(inst: Instance, U: Iterable[int] | None = None) -> SparsityStats:
    pos = inst.contributions > 0
    delta = int(pos.sum(axis=1).max(initial=0))
    gamma = int(pos.sum(axis=0).max(initial=0))
    if U is None:
        return SparsityStats(delta, gamma)
    cols = sorted(set(U))
    if not cols:
        return SparsityStats(delta, gamma, 0, degenerate=True)
    dU = int(pos[:, cols].sum(axis=1).max(initial=0))
    return SparsityStats(delta, gamma, dU)


def dual_objective(inst: Instance, y: DualSolution, U: Iterable[int] | None = None) -> float:
    keep = None if U is None else set(U)
    terms = []
    for (j, S), v in y.items():
        if keep is not None and j not in keep:
            continue
        terms.append(residual_requirement(inst, j, S) * v)
    return math.fsum(terms)


def dual_loads(inst: Instance, y: DualSolution) -> np.ndarray:
    """Per-facility left-hand side ``sum_j sum_{S not containing i} a_ij^S y_j^S``."""
    load = np.zeros(inst.n)
    for (j, S), v in y.items():
        _, row = residual_row(inst, j, S)
        load += row * v
    return load


def dual_feasibility_slack(inst: Instance, y: DualSolution) -> np.ndarray:
    return inst.facility_costs - dual_loads(inst, y)


def is_dual_feasible(inst: Instance, y: DualSolution, tol: float = FEAS_TOL) -> bool:
    return bool(np.all(dual_feasibility_slack(inst, y) >= -tol))


def induce_cost_shares(inst: Instance, y: DualSolution, U: Iterable[int] | None = None,
                       method: str = "", tol: float = FEAS_TOL) -> CostShares:
    """Charge each user ``sum_S r_j^S y_j^S``.

    The dual must be KC-DP feasible, otherwise the resulting shares can
    violate the core property and :class:`InfeasibleDual` is raised.
    """
    slack = dual_feasibility_slack(inst, y)
    worst = float(slack.min(initial=0.0))
    if worst < -tol:
        i = int(np.argmin(slack))
        raise InfeasibleDual(f"dual constraint of facility {i} violated by {-worst:.3g}")
    users = frozenset(inst.users if U is None else (int(j) for j in U))
    per_user: dict[int, list[float]] = {}
    for (j, S), v in y.items():
        if j in users:
            per_user.setdefault(j, []).append(residual_requirement(inst, j, S) * v)
    xi = np.zeros(inst.m)
    for j, terms in per_user.items():
        xi[j] = math.fsum(terms)
    return CostShares(xi, users, method)


def recovery_ratio(shares: CostShares, sel: Selection) -> float:
    if sel.cost <= 0:
        raise ZeroCostSolution("recovery ratio undefined for a zero-cost selection")
    return shares.total / sel.cost


def price_of_fair_sharing(shares: CostShares, sel: Selection) -> float:
    ratio = recovery_ratio(shares, sel)
    return math.inf if ratio == 0 else 1.0 / ratio


def pathological_instance(R: float = 10.0, eps: float = 0.01) -> Instance:
    """Single user needing ``R``; facility ``a`` gives ``R-1`` for ``eps``, ``b`` gives ``R`` for 1."""
    return Instance([eps, 1.0], [R], [[R - 1.0], [R]], meta={"name": "pathological", "R": R, "eps": eps})
