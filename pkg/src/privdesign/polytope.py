"""l1-budget design through extreme points of the conditional polytopes.

For each letter ``u_i`` the conditional ``P_{Y|U=u_i}`` lives in

    S_i = {y >= 0 : M y = M P_Y + eps_i M E J_i}

where the rows of ``M`` span the row space of ``P_{X|Y}`` and ``E`` is a right
inverse of ``P_{X|Y}`` (the inverse of an invertible column block, or the
pseudo-inverse). Optimal conditionals sit at vertices, the entropy of a
vertex is linearised in ``J``, and after the substitution
``eta_i = P_U(u_i) * (nonzero part of the vertex)`` the design for a fixed
vertex-per-letter assignment is a linear program. All LP costs are in bits.
"""

from __future__ import annotations

import enum
import itertools
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import measures
from .errors import (
    LeakageViolated,
    DegenerateBudgetWarning,
    NoFeasibleAssignment,
    NumericalError,
    PrivDesignError,
    RankDeficient,
    ResidualCheckFailed,
    ValidationError,
)
from .linalg import build_m_matrix, invert, matrix_rank, pseudo_inverse, svd
from .lp import FEAS_TOL, LpProblem, LpSolution, LpStatus, make_lp, solve
from .prob import (
    Divergence,
    MechanismDesign,
    Perturbation,
    ProblemInstance,
    bayes_filter,
    make_channel,
    make_pmf,
    marginal_x,
    zero_perturbation,
)

log = logging.getLogger(__name__)

BASE_NEG_TOL = 1e-10
BASE_SUM_TOL = 1e-8
LEAK_TOL = 1e-7
RESIDUAL_TOL = 1e-7
TIE_TOL = 1e-12
# budgets at or below the LP feasibility tolerance cannot be resolved from zero
BUDGET_FLOOR = FEAS_TOL
# letters lighter than this are dropped: LP noise dominates their conditional
NEGLIGIBLE_WEIGHT = 1e-9
# a column is taken in its natural position unless its pivot is this much
# smaller than the best available one
PIVOT_THRESHOLD = 1e-3


class Mode(enum.Enum):
    FULL_ROW_RANK = "full-row-rank"
    PSEUDO_INVERSE = "pinv"


def split_leakage_matrix(p_x_given_y) -> tuple[np.ndarray, np.ndarray]:
    """Pick ``|X|`` independent columns of ``P_{X|Y}``.

    Returns ``(P1, perm)`` where ``perm`` lists the chosen columns first (in
    increasing order) followed by the rest, and ``P1 = P[:, perm[:|X|]]``.
    Columns are scanned left to right (threshold pivoting), so an invertible
    leading block is kept as is.
    """
    p = np.asarray(getattr(p_x_given_y, "matrix", p_x_given_y), dtype=float)
    nx, ny = p.shape
    if nx > ny:
        raise RankDeficient(f"|X|={nx} > |Y|={ny}")
    scale = np.linalg.norm(p, axis=0).max()
    chosen: list[int] = []
    q = np.zeros((nx, 0))
    remaining = list(range(ny))
    while len(chosen) < nx:
        resid = {j: np.linalg.norm(p[:, j] - q @ (q.T @ p[:, j])) for j in remaining}
        best = max(resid.values())
        if best <= 1e-12 * scale:
            raise RankDeficient(f"P_X|Y has rank {len(chosen)} < |X|={nx}")
        pick = next(j for j in remaining if resid[j] >= PIVOT_THRESHOLD * best)
        w = p[:, pick] - q @ (q.T @ p[:, pick])
        q = np.column_stack([q, w / np.linalg.norm(w)])
        chosen.append(pick)
        remaining.remove(pick)
    chosen.sort()
    perm = np.array(chosen + [j for j in range(ny) if j not in chosen])
    return p[:, chosen].copy(), perm


@dataclass(frozen=True)
class ExtremePoint:
    """Vertex of ``S_u`` supported on ``omega``.

    ``base`` is the vertex at ``J = 0``; ``d`` maps ``J`` to the change of the
    nonzero entries (per unit eps); ``l`` is ``log2(base)`` and ``b = l.base``
    (minus the entropy of the base in bits); ``a = l @ d``. ``p_omega`` is the
    column block of ``P_{X|Y}`` on ``omega``.
    """

    index: int
    omega: tuple[int, ...]
    base: np.ndarray
    b: float
    l: np.ndarray
    a: np.ndarray
    d: np.ndarray
    p_omega: np.ndarray
    ny: int

    @property
    def entropy_bits(self) -> float:
        return -self.b

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.base <= 0))

    def full(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.zeros(self.ny)
        out[list(self.omega)] = self.base if values is None else values
        return out

    def eta_to_leakage(self) -> np.ndarray:
        """Matrix ``T`` with ``eps * P_U * J = T @ eta``."""
        r = len(self.omega)
        return self.p_omega @ (np.eye(r) - np.outer(self.base, np.ones(r)))


def _particular_operator(p: np.ndarray, mode: Mode) -> np.ndarray:
    nx, ny = p.shape
    if mode is Mode.PSEUDO_INVERSE:
        return pseudo_inverse(p)
    p1, perm = split_leakage_matrix(p)
    e = np.zeros((ny, nx))
    e[perm[:nx]] = invert(p1)
    return e


def enumerate_extreme_points(inst: ProblemInstance, mode: Mode) -> list[ExtremePoint]:
    p = inst.p_x_given_y.matrix
    ny = inst.ny
    m = build_m_matrix(p, full_row_rank=(mode is Mode.FULL_ROW_RANK))
    e = _particular_operator(p, mode)
    r = m.shape[0]
    mpy = m @ inst.p_y.values
    me = m @ e
    points: list[ExtremePoint] = []
    for omega in itertools.combinations(range(ny), r):
        m_om = m[:, omega]
        s = svd(m_om).sigma
        if s[-1] <= 1e-12 * s[0]:
            log.debug("omega %s skipped: singular column block", omega)
            continue
        base = np.linalg.solve(m_om, mpy)
        if base.min() < -BASE_NEG_TOL:
            log.debug("omega %s skipped: negative base entry %.3g", omega, base.min())
            continue
        base[base < 0] = 0.0
        if abs(base.sum() - 1.0) > BASE_SUM_TOL:
            log.debug("omega %s skipped: base sums to %.12g", omega, base.sum())
            continue
        d = np.linalg.solve(m_om, me)
        pos = base > 0
        l = np.zeros(r)
        l[pos] = np.log2(base[pos])
        b = float(l @ base)
        points.append(ExtremePoint(len(points), tuple(omega), base, b, l, l @ d, d,
                                   p[:, omega].copy(), ny))
    return points


def select_mode(inst: ProblemInstance) -> Mode:
    p = inst.p_x_given_y.matrix
    if p.shape[0] <= p.shape[1] and matrix_rank(p) == p.shape[0]:
        return Mode.FULL_ROW_RANK
    return Mode.PSEUDO_INVERSE


@dataclass(frozen=True)
class Assignment:
    points: tuple[ExtremePoint, ...]
    mode: Mode
    perfect_set: frozenset[int]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(pt.index for pt in self.points)


def make_assignment(points: Sequence[ExtremePoint], indices: Sequence[int],
                    inst: ProblemInstance, mode: Mode) -> Assignment:
    if len(indices) != inst.k:
        raise ValidationError(f"assignment has {len(indices)} letters, instance has {inst.k}")
    perfect = frozenset(np.flatnonzero(inst.budgets.epsilons <= BUDGET_FLOOR).tolist())
    return Assignment(tuple(points[i] for i in indices), mode, perfect)


@dataclass(frozen=True)
class _Layout:
    """Column ranges of each letter's variables in the LP."""

    eta: tuple[slice, ...]
    aux: tuple[Optional[slice], ...]
    n: int


def _layout(assignment: Assignment, nx: int) -> _Layout:
    eta, aux = [], []
    pos = 0
    for i, pt in enumerate(assignment.points):
        if i in assignment.perfect_set:
            eta.append(slice(pos, pos + 1))
            aux.append(None)
            pos += 1
        else:
            r = len(pt.omega)
            eta.append(slice(pos, pos + r))
            aux.append(slice(pos + r, pos + r + nx))
            pos += r + nx
    return _Layout(tuple(eta), tuple(aux), pos)


def assemble_lp(assignment: Assignment, inst: ProblemInstance) -> LpProblem:
    nx, ny = inst.nx, inst.ny
    eps = inst.budgets.epsilons
    lay = _layout(assignment, nx)
    n = lay.n
    cost = np.zeros(n)
    marg = np.zeros((ny, n))
    balance = np.zeros((nx, n))
    eq_rows, eq_rhs = [], []
    in_rows, in_rhs = [], []
    labels = [""] * n

    for i, pt in enumerate(assignment.points):
        sl = lay.eta[i]
        if i in assignment.perfect_set:
            # perfect letter: a weight on the exact base vertex, entropy not linearised
            cost[sl.start] = -pt.b
            for j, y in enumerate(pt.omega):
                marg[y, sl.start] += pt.base[j]
            labels[sl.start] = f"w[{i + 1}]"
            continue
        r = len(pt.omega)
        t = pt.eta_to_leakage()
        ones = np.ones(r)
        # -(P_U b + eps P_U a.J) written in eta
        cost[sl] = -(pt.b * ones + pt.a @ t)
        for j, y in enumerate(pt.omega):
            marg[y, sl.start + j] = 1.0
            labels[sl.start + j] = f"eta[{i + 1}][{j + 1}]"
        # 1'T is identically zero (columns of P and of the base sum to one),
        # so the sum-to-zero constraint on J needs no row of its own
        balance[:, sl] = t
        for j in np.flatnonzero(pt.base <= 0):
            # log of a zero entry is undefined: keep the letter on that face
            row = np.zeros(n)
            row[sl.start + j] = 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)
        ax = lay.aux[i]
        for x in range(nx):
            labels[ax.start + x] = f"t[{i + 1}][{x + 1}]"
            for sign in (1.0, -1.0):
                row = np.zeros(n)
                row[sl] = sign * t[x]
                row[ax.start + x] = -1.0
                in_rows.append(row)
                in_rhs.append(0.0)
        row = np.zeros(n)
        row[ax] = 1.0
        row[sl] = -eps[i] * ones
        in_rows.append(row)
        in_rhs.append(0.0)

    a_eq = np.vstack([marg, balance] + ([np.array(eq_rows)] if eq_rows else []))
    b_eq = np.concatenate([inst.p_y.values, np.zeros(nx), np.array(eq_rhs)])
    a_in = np.array(in_rows) if in_rows else None
    b_in = np.array(in_rhs) if in_rhs else None
    return make_lp(cost, a_eq, b_eq, a_in, b_in, np.zeros(n), labels)


def _residual_j(pt: ExtremePoint, cond_nonzero: np.ndarray, eps: float) -> np.ndarray:
    """``J`` recovered from the vertex through the particular-solution map."""
    return np.linalg.pinv(pt.d) @ (cond_nonzero - pt.base) / eps


def recover_design(solution: LpSolution, assignment: Assignment,
                   inst: ProblemInstance) -> MechanismDesign:
    if solution.status is not LpStatus.OPTIMAL:
        raise NoFeasibleAssignment(f"LP status is {solution.status.value}")
    nx, k = inst.nx, inst.k
    eps = inst.budgets.epsilons
    p = inst.p_x_given_y.matrix
    p_x = marginal_x(inst)
    p_y = inst.p_y.values
    lay = _layout(assignment, nx)
    z = solution.z

    weights = np.array([max(z[lay.eta[i]].sum(), 0.0) for i in range(k)])
    cols = np.tile(p_y[:, None], (1, k))
    perts: list[Optional[Perturbation]] = [None] * k
    leak = np.zeros(k)
    for i, pt in enumerate(assignment.points):
        w = weights[i]
        if w <= NEGLIGIBLE_WEIGHT:
            weights[i] = 0.0
            continue
        if i in assignment.perfect_set:
            cols[:, i] = pt.full()
            perts[i] = zero_perturbation(nx, i + 1)
        else:
            eta = np.maximum(z[lay.eta[i]], 0.0)
            cond = eta / eta.sum()
            cols[:, i] = pt.full(cond)
            j = pt.eta_to_leakage() @ eta / (eps[i] * w)
            perts[i] = Perturbation(j, i + 1, float(eps[i]))
            if assignment.mode is Mode.PSEUDO_INVERSE:
                j_pinv = _residual_j(pt, cond, eps[i])
                res = np.abs(p @ (cols[:, i] - p_y) - eps[i] * j_pinv).max()
                if res > RESIDUAL_TOL:
                    raise ResidualCheckFailed(
                        f"letter {i + 1}: P_X|Y (P_Y|U - P_Y) misses eps J by {res:.3g}; "
                        "the feasible set is empty")
        leak[i] = measures.l1(p @ cols[:, i], p_x)
        if leak[i] > eps[i] + LEAK_TOL:
            raise LeakageViolated(f"letter {i + 1}: l1 leakage {leak[i]:.3g} > {eps[i]:g}")

    p_u = make_pmf(weights / weights.sum())
    pyu = make_channel(cols)
    filt = bayes_filter(p_u, pyu, inst.p_y, inst.mixture_tol)
    exact = measures.mutual_information(p_u, pyu, inst.p_y, inst.mixture_tol)
    h_y_bits = measures.to_bits(measures.entropy(inst.p_y))
    approx = (h_y_bits - solution.objective) * measures.LN2
    return MechanismDesign(p_u, pyu, filt, tuple(perts), exact, approx, leak, inst.budgets,
                           inst.divergence, mode=assignment.mode.value,
                           assignment=assignment.indices)


def solve_assignment(assignment: Assignment, inst: ProblemInstance) -> LpSolution:
    return solve(assemble_lp(assignment, inst))


def candidate_assignments(points: Sequence[ExtremePoint],
                          inst: ProblemInstance) -> Iterator[tuple[int, ...]]:
    """Lexicographic vertex assignments, one per multiset within equal budgets.

    Assignments whose vertex supports cannot cover the support of ``P_Y`` are
    skipped.
    """
    eps = list(inst.budgets.epsilons)
    groups = [len(list(g)) for _, g in itertools.groupby(eps)]
    need = set(np.flatnonzero(inst.p_y.values > 0).tolist())
    per_group = [list(itertools.combinations_with_replacement(range(len(points)), g))
                 for g in groups]
    for combo in itertools.product(*per_group):
        idx = tuple(itertools.chain.from_iterable(combo))
        covered = set().union(*(points[i].omega for i in idx))
        if need <= covered:
            yield idx


def _run_one(args) -> tuple[tuple[int, ...], LpSolution]:
    points, idx, inst, mode = args
    asg = make_assignment(points, idx, inst, mode)
    try:
        return idx, solve_assignment(asg, inst)
    except NumericalError as err:
        return idx, err


def design_lp(inst: ProblemInstance, mode: "Mode | str | None" = None,
              workers: int = 1) -> MechanismDesign:
    """Best design over all vertex assignments (by approximate utility)."""
    if inst.divergence is not Divergence.L1:
        raise ValidationError("the polytope design requires l1 budgets")
    marginal_x(inst)
    if mode is None or mode == "auto":
        mode = select_mode(inst)
    mode = Mode(mode) if not isinstance(mode, Mode) else mode
    eps = inst.budgets.epsilons
    tiny = np.flatnonzero((eps > 0) & (eps <= BUDGET_FLOOR))
    if tiny.size:
        warnings.warn(f"budgets of letters {(tiny + 1).tolist()} are below {BUDGET_FLOOR:g} "
                      "and are treated as zero", DegenerateBudgetWarning, stacklevel=2)
    points = enumerate_extreme_points(inst, mode)
    if not points:
        raise NoFeasibleAssignment("the polytope has no feasible vertex")

    jobs = [(points, idx, inst, mode) for idx in candidate_assignments(points, inst)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run_one(job) for job in jobs]

    failed = [(idx, sol) for idx, sol in results if isinstance(sol, NumericalError)]
    for idx, err in failed:
        log.warning("assignment %s skipped: %s", idx, err)
    ranked = [(sol.objective, idx, sol) for idx, sol in results
              if not isinstance(sol, NumericalError) and sol.status is LpStatus.OPTIMAL]
    if not ranked and failed:
        raise NumericalError(f"{len(failed)} assignment LPs failed numerically and "
                             "none of the rest is feasible")
    log.info("%d assignments examined, %d feasible", len(results), len(ranked))
    if not ranked:
        raise NoFeasibleAssignment("every assignment LP is infeasible; nonzero utility "
                                   "cannot be achieved")
    # smallest objective, ties (within TIE_TOL) to the lexicographically first
    ranked.sort(key=lambda t: t[1])
    order = []
    remaining = ranked
    while remaining:
        best_val = min(r[0] for r in remaining)
        first = next(r for r in remaining if r[0] <= best_val + TIE_TOL)
        order.append(first)
        remaining = [r for r in remaining if r is not first]
    last_err: Optional[PrivDesignError] = None
    for _, idx, sol in order:
        try:
            return recover_design(sol, make_assignment(points, idx, inst, mode), inst)
        except (LeakageViolated, ResidualCheckFailed) as err:
            log.warning("assignment %s rejected: %s", idx, err)
            last_err = err
    raise NoFeasibleAssignment(f"no assignment survived recovery checks: {last_err}")
