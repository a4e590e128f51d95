"""Dense tableau simplex for small linear programs.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0`` so that the slack
basis is feasible from the start.  Pivoting uses Bland's rule, which rules
out cycling on degenerate problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9


class UnboundedError(ArithmeticError):
    pass


@dataclass
class LpResult:
    value: float
    x: np.ndarray
    iterations: int


def simplex_max(c, A, b, tol: float = PIVOT_TOL, max_iter: int = 100_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("shape mismatch between c, A and b")
    if np.any(b < -tol):
        raise ValueError("simplex_max needs b >= 0 (slack basis must be feasible)")

    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = np.maximum(b, 0.0)
    tab[m, :n] = -c
    basis = list(range(n, n + m))

    for it in range(max_iter):
        reduced = tab[m, :-1]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            x = np.zeros(n + m)
            x[basis] = tab[:m, -1]
            return LpResult(float(tab[m, -1]), x[:n], it)
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise UnboundedError("objective is unbounded")
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol]
        row = int(min(tied, key=lambda r: basis[r]))

        tab[row] /= tab[row, col]
        others = np.arange(m + 1) != row
        tab[others] -= np.outer(tab[others, col], tab[row])
        basis[row] = col
    raise RuntimeError(f"simplex did not terminate within {max_iter} pivots")
