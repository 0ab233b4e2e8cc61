"""Exact divergences and information quantities.

Everything is in nats; ``0 log 0 = 0``. Use :data:`LN2` to convert to bits.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, MixtureMismatch, SupportViolation, ZeroReference
from .prob import MIXTURE_TOL, Channel, Divergence, Pmf

LN2 = float(np.log(2.0))

__all__ = ["Divergence", "LN2", "kl", "chi_square", "l1", "entropy",
           "mutual_information", "divergence", "to_bits"]


def _vals(p) -> np.ndarray:
    return np.asarray(getattr(p, "values", p), dtype=float)


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    a, b = _vals(p), _vals(q)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    return a, b


def to_bits(nats: float) -> float:
    return nats / LN2


def kl(p: Pmf, q: Pmf) -> float:
    a, b = _pair(p, q)
    s = a > 0
    if np.any(b[s] <= 0):
        raise SupportViolation("p puts mass where q is zero")
    return max(float(np.sum(a[s] * np.log(a[s] / b[s]))), 0.0)


def chi_square(p: Pmf, q: Pmf) -> float:
    a, b = _pair(p, q)
    if np.any(b <= 0):
        raise ZeroReference("chi-square reference has a zero entry")
    return float(np.sum((a - b) ** 2 / b))


def l1(p: Pmf, q: Pmf) -> float:
    a, b = _pair(p, q)
    return float(np.abs(a - b).sum())


def divergence(kind: Divergence, p: Pmf, q: Pmf) -> float:
    if kind is Divergence.L1:
        return l1(p, q)
    if kind is Divergence.CHI_SQUARE:
        return chi_square(p, q)
    return kl(p, q)


def entropy(p: Pmf) -> float:
    a = _vals(p)
    s = a > 0
    return max(float(-np.sum(a[s] * np.log(a[s]))), 0.0)


def mutual_information(p_u: Pmf, p_y_given_u: Channel, p_y: Pmf,
                       tol: float = MIXTURE_TOL) -> float:
    """``I(U;Y) = sum_u P_U(u) D(P_{Y|U=u} || P_Y)``."""
    pu = _vals(p_u)
    pyu = np.asarray(getattr(p_y_given_u, "matrix", p_y_given_u), dtype=float)
    py = _vals(p_y)
    if pyu.shape != (len(py), len(pu)):
        raise DimensionMismatch(f"P_Y|U has shape {pyu.shape}, expected {(len(py), len(pu))}")
    err = np.max(np.abs(pyu @ pu - py))
    if err > tol:
        raise MixtureMismatch(f"mixture differs from P_Y by {err:.3g}")
    total = 0.0
    for u, w in enumerate(pu):
        if w > 0:
            total += w * kl(pyu[:, u], py)
    return max(total, 0.0)
