"""Invariant checks shared by the unit tests and the acceptance suite."""

import numpy as np

from privdesign import measures
from privdesign.linalg import build_m_matrix, matrix_rank
from privdesign.polytope import BUDGET_FLOOR, Mode, _particular_operator
from privdesign.prob import MechanismDesign, ProblemInstance, marginal_x

PROPER_TOL = 1e-7
MIXTURE_TOL = 1e-8
VERTEX_TOL = 1e-7


def residuals(d: MechanismDesign, inst: ProblemInstance) -> dict:
    """Worst zero-sum, balance and mixture residuals of a design."""
    eps = inst.budgets.epsilons
    balance = np.zeros(inst.nx)
    zero_sum = 0.0
    for i in d.used_letters:
        j = d.perturbations[i].j
        zero_sum = max(zero_sum, abs(float(j.sum())))
        balance += eps[i] * d.p_u.values[i] * j
    mix = d.p_y_given_u.matrix @ d.p_u.values - inst.p_y.values
    return {"zero_sum": zero_sum, "balance": float(np.abs(balance).max()),
            "mixture": float(np.abs(mix).max())}


def check_residuals(d: MechanismDesign, inst: ProblemInstance) -> None:
    r = residuals(d, inst)
    assert r["zero_sum"] <= PROPER_TOL, r
    assert r["balance"] <= PROPER_TOL, r
    assert r["mixture"] <= MIXTURE_TOL, r


def check_invertible_design(d: MechanismDesign, inst: ProblemInstance) -> None:
    check_residuals(d, inst)
    p_x = marginal_x(inst)
    pxu = inst.p_x_given_y.matrix @ d.p_y_given_u.matrix
    for i in d.used_letters:
        assert measures.chi_square(pxu[:, i], p_x) <= inst.budgets[i] ** 2 + 1e-10


def vertex_residual(d: MechanismDesign, inst: ProblemInstance, mode: Mode) -> float:
    """Distance of each used conditional from its polytope, plus a vertex-support check."""
    p = inst.p_x_given_y.matrix
    eps = inst.budgets.epsilons
    m = build_m_matrix(p, full_row_rank=(mode is Mode.FULL_ROW_RANK))
    e = _particular_operator(p, mode)
    worst = 0.0
    for i in d.used_letters:
        col = d.p_y_given_u.matrix[:, i]
        j = d.perturbations[i].j
        worst = max(worst, float(np.abs(m @ col - m @ inst.p_y.values - eps[i] * m @ e @ j).max()))
        support = np.flatnonzero(col > 1e-12)
        if len(support) > m.shape[0] or matrix_rank(m[:, support]) != len(support):
            return np.inf
    return worst


def check_lp_design(d: MechanismDesign, inst: ProblemInstance, mode: Mode) -> None:
    """Feasibility, balance, mixture and vertex-membership checks."""
    check_residuals(d, inst)
    p = inst.p_x_given_y.matrix
    p_x = marginal_x(inst)
    eps = inst.budgets.epsilons
    for i in d.used_letters:
        col = d.p_y_given_u.matrix[:, i]
        leak = measures.l1(p @ col, p_x)
        assert leak <= eps[i] + 1e-7
        if eps[i] <= BUDGET_FLOOR:
            assert leak <= 1e-12
        else:
            assert np.abs(d.perturbations[i].j).sum() <= 1 + 1e-7
    assert vertex_residual(d, inst, mode) <= VERTEX_TOL
