"""Closed-form chi-square design for a square invertible leakage matrix.

Budgets follow the perturbation convention ``P_{X|U=u_i} = P_X + eps_i J``
with ``||[sqrt P_X]^-1 J||_2 <= 1``, i.e. ``chi2(P_{X|U=u_i} || P_X) <= eps_i**2``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import measures
from .errors import DegenerateBudgetWarning, DimensionMismatch, EpsilonTooLarge, ValidationError
from .linalg import invert, projected_operator, svd
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

NEGATIVE_TOL = 1e-12
BASE_NOTE = ("conditionals P_Y|U are built around P_Y (the Y-space marginal); "
             "the X-space marginal cannot be the base of a |Y|-vector")


@dataclass(frozen=True)
class SpectralDesign:
    w: np.ndarray
    sigma_max: float
    l_star: np.ndarray
    approx_utility: float
    p_x_given_y_inv: np.ndarray


def compute_w(inst: ProblemInstance) -> SpectralDesign:
    """Top singular pair of ``W`` restricted to the complement of ``sqrt(P_X)``.

    ``W = [sqrt P_Y]^-1 P_{X|Y}^-1 [sqrt P_X]``.
    """
    p = inst.p_x_given_y.matrix
    if p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"invertible design needs a square P_X|Y, got {p.shape}")
    p_x = marginal_x(inst)
    p_y = inst.p_y.values
    if np.any(p_y <= 0):
        raise ValidationError("P_Y must be strictly positive for the invertible design")
    p_inv = invert(p)
    sqrt_x = np.sqrt(p_x.values)
    w = (p_inv * sqrt_x) / np.sqrt(p_y)[:, None]
    res = svd(projected_operator(w, sqrt_x))
    sigma = float(res.sigma[0])
    l_star = res.v[:, 0].copy()
    # exact orthogonality against sqrt(P_X) and unit length
    l_star -= (l_star @ sqrt_x) * sqrt_x
    l_star /= np.linalg.norm(l_star)
    e = inst.budgets.epsilons
    approx = 0.5 * e[0] * e[1] * sigma ** 2
    return SpectralDesign(w, sigma, l_star, float(approx), p_inv)


def sandwich_bounds(inst: ProblemInstance) -> tuple[float, float, float]:
    """``(eps_K^2, eps_1 eps_2, eps_1^2) * sigma_max^2 / 2``."""
    s2 = compute_w(inst).sigma_max ** 2
    e = inst.budgets.epsilons
    return 0.5 * e[-1] ** 2 * s2, 0.5 * e[0] * e[1] * s2, 0.5 * e[0] ** 2 * s2


def _constant_design(inst: ProblemInstance, p_x) -> MechanismDesign:
    k, nx = inst.k, inst.nx
    p_u = make_pmf(np.eye(k)[0])
    pyu = make_channel(np.tile(inst.p_y.values[:, None], (1, k)))
    filt = bayes_filter(p_u, pyu, inst.p_y)
    perts = (zero_perturbation(nx, 1),) + (None,) * (k - 1)
    return MechanismDesign(p_u, pyu, filt, perts, 0.0, 0.0, np.zeros(k), inst.budgets,
                           inst.divergence, mode="invertible",
                           warnings=("eps_2 = 0: only the constant mechanism is feasible",))


def design_invertible(inst: ProblemInstance) -> MechanismDesign:
    if inst.divergence is not Divergence.CHI_SQUARE:
        raise ValidationError("the invertible design requires chi2 budgets")
    p_x = marginal_x(inst)
    e = inst.budgets.epsilons
    if e[1] == 0:
        warnings.warn("second budget is zero; returning the constant mechanism",
                      DegenerateBudgetWarning, stacklevel=2)
        return _constant_design(inst, p_x)

    ws = compute_w(inst)
    sqrt_x = np.sqrt(p_x.values)
    j_dir = sqrt_x * ws.l_star
    y_dir = ws.p_x_given_y_inv @ j_dir
    p_y = inst.p_y.values
    e1, e2 = float(e[0]), float(e[1])
    k = inst.k

    cols = np.tile(p_y[:, None], (1, k))
    cols[:, 0] = p_y + e1 * y_dir
    cols[:, 1] = p_y - e2 * y_dir
    if cols.min() < -NEGATIVE_TOL:
        raise EpsilonTooLarge(
            f"budgets ({e1:g}, {e2:g}) push P_Y|U below zero ({cols.min():.3g}); "
            "outside the local regime")
    cols[cols < 0] = 0.0

    weights = np.zeros(k)
    weights[0] = e2 / (e1 + e2)
    weights[1] = e1 / (e1 + e2)
    p_u = make_pmf(weights)
    pyu = make_channel(cols)
    filt = bayes_filter(p_u, pyu, inst.p_y, inst.mixture_tol)

    perts = [Perturbation(j_dir.copy(), 1, e1), Perturbation(-j_dir, 2, e2)]
    perts += [None] * (k - 2)
    pxu = inst.p_x_given_y.matrix @ cols
    leak = np.zeros(k)
    for i in (0, 1):
        leak[i] = measures.chi_square(pxu[:, i], p_x)
    exact = measures.mutual_information(p_u, pyu, inst.p_y, inst.mixture_tol)
    log.debug("invertible design: sigma_max=%.6g approx=%.6g exact=%.6g",
              ws.sigma_max, ws.approx_utility, exact)
    return MechanismDesign(p_u, pyu, filt, tuple(perts), exact, ws.approx_utility, leak,
                           inst.budgets, inst.divergence, mode="invertible",
                           warnings=(BASE_NOTE,))
