"""Dense revised simplex for the packing form of a covering LP.

The covering master ``min c.x  s.t.  M^T x >= b, x >= 0`` (one column of ``M``
per cut) is solved through its dual ``max b.y  s.t.  M y <= c, y >= 0``.  With
``c >= 0`` the all-slack basis is feasible, so no phase one is needed, and a
basis stays feasible when new columns arrive: warm starting across cutting
plane rounds is free.  The covering solution ``x`` is read off the simplex
multipliers.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .core import CIPError


class UnboundedOrInfeasibleLP(CIPError):
    pass


class PackingSimplex:
    """``max b.y  s.t.  M y <= c, y >= 0`` with Bland's pivoting rule.

    Variables ``0..n-1`` are slacks, ``n..n+k-1`` are the appended columns.
    """

    def __init__(self, c, tol: float = 1e-9, max_iter: int = 200_000):
        c = np.asarray(c, dtype=float)
        if np.any(c < 0):
            raise ValueError("packing right-hand side must be nonnegative")
        self.c = c
        self.n = c.size
        self.tol = tol
        self.max_iter = max_iter
        self._cols: list[np.ndarray] = []
        self._obj: list[float] = []
        self._M = np.zeros((self.n, 0))
        self.basis = list(range(self.n))
        self.iterations = 0

    @property
    def k(self) -> int:
        return len(self._cols)

    def add_column(self, col, obj: float) -> int:
        col = np.asarray(col, dtype=float)
        if col.shape != (self.n,):
            raise ValueError(f"column must have length {self.n}")
        self._cols.append(col)
        self._obj.append(float(obj))
        self._M = None
        return self.k - 1

    def _matrix(self) -> np.ndarray:
        if self._M is None:
            self._M = np.column_stack(self._cols) if self._cols else np.zeros((self.n, 0))
        return self._M

    def _column(self, var: int) -> np.ndarray:
        if var < self.n:
            e = np.zeros(self.n)
            e[var] = 1.0
            return e
        return self._cols[var - self.n]

    def solve(self):
        """Pivot to optimality; returns ``(y, x, objective)``."""
        M = self._matrix()
        obj = np.concatenate([np.zeros(self.n), np.asarray(self._obj)])
        tol = self.tol
        while True:
            if self.iterations >= self.max_iter:
                raise UnboundedOrInfeasibleLP("simplex iteration limit reached")
            B = np.column_stack([self._column(v) for v in self.basis])
            lu = lu_factor(B)
            xB = lu_solve(lu, self.c)
            pi = lu_solve(lu, obj[self.basis], trans=1)
            # reduced costs: slacks give -pi, columns give b_k - pi.M_k
            red = np.concatenate([-pi, obj[self.n:] - pi @ M])
            red[self.basis] = 0.0
            entering = np.flatnonzero(red > tol)
            if entering.size == 0:
                break
            e = int(entering[0])
            u = lu_solve(lu, self._column(e))
            pos = u > tol
            if not pos.any():
                raise UnboundedOrInfeasibleLP(
                    "packing LP unbounded: some cut has positive right-hand side but no coverage"
                )
            ratios = np.full(self.n, np.inf)
            ratios[pos] = np.maximum(xB[pos], 0.0) / u[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + tol * max(1.0, best))
            leave = min(ties, key=lambda r: self.basis[r])
            self.basis[leave] = e
            self.iterations += 1
        y = np.zeros(self.k)
        for pos_, var in enumerate(self.basis):
            if var >= self.n:
                y[var - self.n] = max(xB[pos_], 0.0)
        x = np.maximum(pi, 0.0)
        objective = float(np.asarray(self._obj) @ y) if self.k else 0.0
        return y, x, objective
