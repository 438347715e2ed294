"""
Dense simplex routine for Stratified HJB.

Solves  maximize c.x  subject to  A_eq x = b_eq, x >= 0  with a two-phase
tableau method and Bland's pivoting rule. Problems here are tiny (a few dozen
mixture weights, a handful of equality rows) so a dense tableau is enough.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-11
MAX_VARIABLES = 64


@dataclass
class LPResult:
    """Outcome of one linear program."""

    status: str
    x: Optional[np.ndarray] = None
    value: float = -np.inf
    has_ties: bool = False

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _iterate(tableau: np.ndarray, basis: List[int], allowed: int) -> str:
    """Minimize the objective row in place; columns >= allowed never enter."""
    m = len(basis)
    limit = 50 * (m + allowed) + 100
    for _ in range(limit):
        reduced = tableau[-1, :allowed]
        entering = np.flatnonzero(reduced < -PIVOT_TOL)
        if entering.size == 0:
            return OPTIMAL
        col = int(entering[0])
        column = tableau[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return UNBOUNDED
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
    raise RuntimeError("Simplex iteration limit reached")


def linprog_eq(c: np.ndarray, A_eq: np.ndarray, b_eq: np.ndarray,
               feas_tol: float = 1e-10) -> LPResult:
    """
    Maximize c.x subject to A_eq x = b_eq and x >= 0.

    Args:
        c: Objective coefficients (n,)
        A_eq: Equality matrix (m, n)
        b_eq: Right-hand side (m,)
        feas_tol: Phase-one residual accepted as feasible

    Returns:
        LPResult; has_ties is set when a nonbasic column has zero reduced cost
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_eq, dtype=float)).copy()
    b = np.asarray(b_eq, dtype=float).reshape(-1).copy()
    m, n = A.shape
    if n > MAX_VARIABLES * 4:
        raise ValueError(f"LP with {n} variables exceeds the dense solver size")

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # Phase one: artificials n..n+m-1
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -A.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    _iterate(tableau, basis, n + m)
    if -tableau[-1, -1] > feas_tol:
        return LPResult(status=INFEASIBLE)

    # Drive artificials out of the basis; rows with no usable pivot are redundant
    keep_rows = []
    for row in range(m):
        if basis[row] >= n:
            candidates = np.flatnonzero(np.abs(tableau[row, :n]) > PIVOT_TOL)
            if candidates.size == 0:
                continue
            _pivot(tableau, row, int(candidates[0]))
            basis[row] = int(candidates[0])
        keep_rows.append(row)

    body = tableau[keep_rows][:, list(range(n)) + [n + m]]
    basis = [basis[r] for r in keep_rows]
    k = len(basis)

    # Phase two: minimize -c.x
    phase2 = np.zeros((k + 1, n + 1))
    phase2[:k] = body
    cost = -c
    phase2[-1, :n] = cost
    for row, var in enumerate(basis):
        phase2[-1] -= cost[var] * phase2[row]

    status = _iterate(phase2, basis, n)
    if status == UNBOUNDED:
        return LPResult(status=UNBOUNDED, value=np.inf)

    x = np.zeros(n)
    for row, var in enumerate(basis):
        x[var] = max(phase2[row, -1], 0.0)
    nonbasic = np.setdiff1d(np.arange(n), basis)
    ties = bool(np.any(np.abs(phase2[-1, nonbasic]) <= PIVOT_TOL)) if nonbasic.size else False
    return LPResult(status=OPTIMAL, x=x, value=float(c @ x), has_ties=ties)


def lexicographic_optimum(c: np.ndarray, A_eq: np.ndarray, b_eq: np.ndarray, value: float,
                          feas_tol: float = 1e-10) -> np.ndarray:
    """
    Lexicographically smallest optimal point.

    Minimizes x_0, then x_1, ... over {A_eq x = b_eq, x >= 0, c.x >= value - slack},
    fixing each coordinate before moving on.

    Returns:
        The lexicographically smallest optimizer found
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).reshape(-1)
    n = c.size
    slack = 1e-12 * max(1.0, abs(value))

    # Extra rows are inequalities; each gets its own slack column
    extra_rows = [c]
    extra_rhs = [value - slack]
    extra_sense = [-1.0]
    best = None
    for i in range(n):
        rows = len(extra_rows)
        matrix = np.zeros((A.shape[0] + rows, n + rows))
        matrix[:A.shape[0], :n] = A
        for j, (row, sense) in enumerate(zip(extra_rows, extra_sense)):
            matrix[A.shape[0] + j, :n] = row
            matrix[A.shape[0] + j, n + j] = sense
        rhs = np.concatenate([b, extra_rhs])
        objective = np.zeros(n + rows)
        objective[i] = -1.0
        result = linprog_eq(objective, matrix, rhs, feas_tol=feas_tol)
        if result.status != OPTIMAL:
            break
        best = result.x[:n]
        unit = np.zeros(n)
        unit[i] = 1.0
        extra_rows.append(unit)
        extra_rhs.append(best[i] + 1e-13)
        extra_sense.append(1.0)
        # Remaining coordinates already at their lower bound
        if not np.any(best[i + 1:] > 0.0):
            break
    return best
