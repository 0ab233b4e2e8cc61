"""Two-phase revised primal simplex with Bland's rule.

Problems are ``min c.z`` subject to ``A_eq z = b_eq``, ``A_in z <= b_in`` and
per-variable lower bounds (``-inf`` for free variables). Sizes are tens of
variables, so every iteration re-solves the dense basis system from the
original data instead of updating a tableau; this avoids error drift on the
badly scaled rows that tiny budgets produce.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, MaxIterations, NumericalError

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
FEAS_TOL = 1e-7
ZERO_ROW_TOL = 1e-13
HARRIS_TOL = 1e-9
STALL_LIMIT = 50


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    cost: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    ineq_lhs: np.ndarray
    ineq_rhs: np.ndarray
    lower_bounds: np.ndarray
    labels: Optional[tuple[str, ...]] = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return len(self.cost)


def make_lp(cost, eq_lhs=None, eq_rhs=None, ineq_lhs=None, ineq_rhs=None,
            lower_bounds=None, labels=None) -> LpProblem:
    c = np.asarray(cost, dtype=float).reshape(-1)
    n = c.size

    def block(lhs, rhs, name):
        if lhs is None:
            return np.zeros((0, n)), np.zeros(0)
        a = np.asarray(lhs, dtype=float).reshape(-1, n)
        b = np.asarray(rhs, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise DimensionMismatch(f"{name}: {a.shape[0]} rows but {b.size} right-hand sides")
        return a, b

    a_eq, b_eq = block(eq_lhs, eq_rhs, "equalities")
    a_in, b_in = block(ineq_lhs, ineq_rhs, "inequalities")
    lb = np.zeros(n) if lower_bounds is None else np.asarray(lower_bounds, dtype=float).reshape(-1)
    if lb.size != n:
        raise DimensionMismatch("lower_bounds length differs from cost length")
    for arr in (c, a_eq, b_eq, a_in, b_in):
        if not np.all(np.isfinite(arr)):
            raise ValueError("LP coefficients must be finite")
    if np.any(np.isnan(lb)) or np.any(lb == np.inf):
        raise ValueError("lower bounds must be finite or -inf")
    return LpProblem(c, a_eq, b_eq, a_in, b_in, lb, tuple(labels) if labels else None)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    z: np.ndarray
    objective: float
    iterations: int = 0


def _standard_form(lp: LpProblem):
    """Map z = shift + T x with x >= 0, then add slacks for inequalities."""
    n = lp.n
    free = np.isneginf(lp.lower_bounds)
    shift = np.where(free, 0.0, lp.lower_bounds)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(e)
        if free[j]:
            cols.append(-e)
    tmat = np.column_stack(cols)
    n_x = tmat.shape[1]
    m_eq, m_in = lp.eq_lhs.shape[0], lp.ineq_lhs.shape[0]
    a = np.zeros((m_eq + m_in, n_x + m_in))
    a[:m_eq, :n_x] = lp.eq_lhs @ tmat
    a[m_eq:, :n_x] = lp.ineq_lhs @ tmat
    a[m_eq:, n_x:] = np.eye(m_in)
    b = np.concatenate([lp.eq_rhs - lp.eq_lhs @ shift, lp.ineq_rhs - lp.ineq_lhs @ shift])
    c = np.concatenate([lp.cost @ tmat, np.zeros(m_in)])
    return a, b, c, tmat, shift


def _check(lp: LpProblem, z: np.ndarray) -> float:
    worst = 0.0
    if lp.eq_lhs.size:
        worst = max(worst, float(np.max(np.abs(lp.eq_lhs @ z - lp.eq_rhs))))
    if lp.ineq_lhs.size:
        worst = max(worst, float(np.max(lp.ineq_lhs @ z - lp.ineq_rhs, initial=0.0)))
    finite = np.isfinite(lp.lower_bounds)
    if finite.any():
        worst = max(worst, float(np.max(lp.lower_bounds[finite] - z[finite], initial=0.0)))
    return worst


def _equilibrate(a: np.ndarray, b: np.ndarray):
    """Scale rows to unit max-norm; drop all-zero rows (None if one is inconsistent)."""
    norms = np.abs(a).max(axis=1) if a.size else np.zeros(a.shape[0])
    empty = norms <= ZERO_ROW_TOL
    if np.any(np.abs(b[empty]) > FEAS_TOL):
        return None
    keep = ~empty
    return a[keep] / norms[keep, None], b[keep] / norms[keep]


class _Revised:
    """Revised simplex: basic values and duals are re-solved from ``a`` every step."""

    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int], max_iter: int,
                 iterations: int = 0):
        self.a, self.b, self.basis = a, b, basis
        self.max_iter = max_iter
        self.iterations = iterations
        self.degenerate = 0

    def _solve(self, mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        try:
            return np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError as err:
            raise NumericalError("simplex basis became singular") from err

    def values(self) -> np.ndarray:
        return self._solve(self.a[:, self.basis], self.b)

    def run(self, c: np.ndarray, allowed: np.ndarray) -> bool:
        """Bland's-rule iterations minimising ``c``; False if unbounded."""
        cost_tol = COST_TOL * max(1.0, float(np.abs(c).max(initial=0.0)))
        while True:
            bmat = self.a[:, self.basis]
            xb = self._solve(bmat, self.b)
            y = self._solve(bmat.T, c[self.basis])
            red = c - y @ self.a
            red[self.basis] = 0.0
            cand = np.flatnonzero((red < -cost_tol) & allowed)
            if cand.size == 0:
                return True
            if self.iterations >= self.max_iter:
                raise MaxIterations(f"simplex exceeded {self.max_iter} iterations")
            self.iterations += 1
            q = int(cand[0])
            w = self._solve(bmat, self.a[:, q])
            rows = np.flatnonzero(w > PIVOT_TOL)
            if rows.size == 0:
                return False
            r = self._leaving(xb, w, rows)
            if xb[r] <= HARRIS_TOL:
                self.degenerate += 1
            else:
                self.degenerate = 0
            self.basis[r] = q

    def _leaving(self, xb: np.ndarray, w: np.ndarray, rows: np.ndarray) -> int:
        xr = np.maximum(xb[rows], 0.0)
        if self.degenerate > STALL_LIMIT:
            # long degenerate run: plain Bland leaving rule guarantees termination
            ratios = xr / w[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
            return int(min(ties, key=lambda i: self.basis[i]))
        # Harris: relax bounds by a tolerance, then take the largest pivot
        bound = ((xr + HARRIS_TOL) / w[rows]).min()
        window = rows[xr / w[rows] <= bound]
        big = w[window].max()
        pick = window[w[window] >= big * (1 - 1e-12)]
        return int(min(pick, key=lambda i: self.basis[i]))

    def drive_out_artificials(self, n_orig: int) -> None:
        """Pivot zero-level artificials out of the basis; drop redundant rows."""
        r = 0
        while r < len(self.basis):
            if self.basis[r] < n_orig:
                r += 1
                continue
            unit = np.zeros(len(self.basis))
            unit[r] = 1.0
            row = self._solve(self.a[:, self.basis].T, unit) @ self.a[:, :n_orig]
            row[[j for j in self.basis if j < n_orig]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                self.basis[r] = j
                r += 1
                continue
            # row r is a combination of the others
            art = self.basis.pop(r)
            row_idx = art - n_orig
            keep = [i for i in range(self.a.shape[0]) if i != row_idx]
            self.a = np.delete(self.a[keep], art, axis=1)
            self.b = self.b[keep]
            self.basis = [j if j < art else j - 1 for j in self.basis]
            n_art = self.a.shape[1] - n_orig
            # artificial columns are identity columns; keep their numbering aligned with rows
            assert n_art == self.a.shape[0]
            r = 0


def solve(lp: LpProblem) -> LpSolution:
    a, b, c, tmat, shift = _standard_form(lp)
    m, n_std = a.shape
    scaled = _equilibrate(a, b) if m else (a, b)
    if scaled is None:
        return LpSolution(LpStatus.INFEASIBLE, np.full(lp.n, np.nan), np.nan)
    a, b = scaled
    m = a.shape[0]
    if m == 0:
        if np.any(c < -COST_TOL):
            return LpSolution(LpStatus.UNBOUNDED, np.full(lp.n, np.nan), -np.inf)
        z = shift.copy()
        return LpSolution(LpStatus.OPTIMAL, z, float(lp.cost @ z))
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0
    max_iter = 10 * (m + n_std) ** 2

    # phase 1: minimise the sum of artificials
    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    simplex = _Revised(a1, b.copy(), list(range(n_std, n_std + m)), max_iter)
    simplex.run(c1, np.ones(n_std + m, dtype=bool))
    xb = simplex.values()
    infeas = float(sum(v for j, v in zip(simplex.basis, xb) if j >= n_std))
    if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max())):
        log.debug("phase 1 ended with infeasibility %.3g", infeas)
        return LpSolution(LpStatus.INFEASIBLE, np.full(lp.n, np.nan), np.nan,
                          simplex.iterations)
    simplex.drive_out_artificials(n_std)

    # phase 2 on the original columns
    phase2 = _Revised(simplex.a[:, :n_std], simplex.b, simplex.basis, max_iter,
                      simplex.iterations)
    if not phase2.run(c, np.ones(n_std, dtype=bool)):
        return LpSolution(LpStatus.UNBOUNDED, np.full(lp.n, np.nan), -np.inf, phase2.iterations)

    x = np.zeros(n_std)
    x[phase2.basis] = phase2.values()
    x[np.abs(x) < 1e-13] = 0.0
    x = np.maximum(x, 0.0)
    z = shift + tmat @ x[:tmat.shape[1]]
    worst = _check(lp, z)
    if worst > FEAS_TOL:
        raise NumericalError(f"simplex solution violates constraints by {worst:.3g}")
    return LpSolution(LpStatus.OPTIMAL, z, float(lp.cost @ z), phase2.iterations)
