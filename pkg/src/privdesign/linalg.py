"""Small dense linear algebra built on a one-sided Jacobi SVD.

Alphabets here are at most a few hundred letters, so the Hestenes
(one-sided Jacobi) method is used for its accuracy on small matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, RankDeficient, Singular

MAX_SWEEPS = 100
OFFDIAG_TOL = 1e-12
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(sigma) @ v.T`` with ``k = min(m, n)`` components."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def rank(self, rtol: float = RANK_RTOL) -> int:
        if self.sigma.size == 0 or self.sigma[0] == 0:
            return 0
        return int(np.sum(self.sigma >= rtol * self.sigma[0]))


def _as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _hestenes(a: np.ndarray, max_sweeps: int = MAX_SWEEPS,
              tol: float = OFFDIAG_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Rotate columns of ``a`` until mutually orthogonal; returns ``(a @ v, v)``."""
    b = a.copy()
    n = b.shape[1]
    v = np.eye(n)
    scale = np.linalg.norm(b)
    floor = (1e-300 if scale == 0 else (np.finfo(float).eps * scale) ** 2)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                bi, bj = b[:, i], b[:, j]
                alpha = bi @ bi
                beta = bj @ bj
                gamma = bi @ bj
                if abs(gamma) <= floor or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                bi_old = bi.copy()
                b[:, i] = c * bi_old - s * bj
                b[:, j] = s * bi_old + c * bj
                vi_old = v[:, i].copy()
                v[:, i] = c * vi_old - s * v[:, j]
                v[:, j] = s * vi_old + c * v[:, j]
        if not rotated:
            return b, v
    raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")


def _complete_basis(q: np.ndarray, m: int) -> np.ndarray:
    """Extend orthonormal columns ``q`` (m x r) to an orthonormal m x m basis."""
    cols = [q[:, i] for i in range(q.shape[1])]
    for e in np.eye(m):
        if len(cols) == m:
            break
        w = e.copy()
        for _ in range(2):
            for c in cols:
                w -= (c @ w) * c
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            cols.append(w / nrm)
    return np.column_stack(cols) if cols else np.zeros((m, 0))


def _full_svd(a: np.ndarray):
    """Singular values (all n, sorted), right vectors (n x n) and scaled columns."""
    b, v = _hestenes(a)
    norms = np.linalg.norm(b, axis=0)
    order = np.argsort(-norms, kind="stable")
    norms, v, b = norms[order], v[:, order], b[:, order]
    # deterministic signs: first non-negligible entry of each right vector positive
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > 1e-12)
        if nz.size and v[nz[0], j] < 0:
            v[:, j] *= -1.0
            b[:, j] *= -1.0
    return norms, v, b


def svd(a) -> SvdResult:
    a = _as_matrix(a)
    m, n = a.shape
    k = min(m, n)
    norms, v, b = _full_svd(a)
    sigma = norms[:k]
    cut = RANK_RTOL * sigma[0] if k and sigma[0] > 0 else 0.0
    r = int(np.sum(sigma > cut)) if k else 0
    u = b[:, :r] / sigma[:r] if r else np.zeros((m, 0))
    u = _complete_basis(u, m)[:, :k]
    return SvdResult(u=u, sigma=sigma.copy(), v=v[:, :k].copy())


def null_space(a, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of ``{x : a x = 0}``."""
    a = _as_matrix(a)
    norms, v, _ = _full_svd(a)
    top = norms[0] if norms.size else 0.0
    keep = norms <= rtol * top if top > 0 else np.ones(norms.shape, bool)
    # beyond min(m, n) the Jacobi column norms are already ~0
    return v[:, keep]


def matrix_rank(a, rtol: float = RANK_RTOL) -> int:
    return svd(a).rank(rtol)


def invert(a) -> np.ndarray:
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"cannot invert non-square {a.shape} matrix")
    s = svd(a).sigma
    if s[0] == 0 or s[-1] / s[0] < RANK_RTOL:
        raise Singular("matrix is numerically singular")
    return np.linalg.inv(a)


def pseudo_inverse(a, rtol: float = RANK_RTOL) -> np.ndarray:
    a = _as_matrix(a)
    res = svd(a)
    r = res.rank(rtol)
    if r == 0:
        return np.zeros(a.T.shape)
    return (res.v[:, :r] / res.sigma[:r]) @ res.u[:, :r].T


def build_m_matrix(p_x_given_y, full_row_rank: bool = True) -> np.ndarray:
    """Rows are the leading right singular vectors of ``P_{X|Y}``.

    With ``full_row_rank`` the channel must have rank ``|X|`` and exactly
    ``|X|`` rows are returned. Otherwise one row per nonzero singular value
    is returned, which spans the same row space.
    """
    p = _as_matrix(getattr(p_x_given_y, "matrix", p_x_given_y))
    nx, ny = p.shape
    res = svd(p)
    r = res.rank()
    if full_row_rank:
        if nx > ny:
            raise RankDeficient(f"|X|={nx} exceeds |Y|={ny}; no full row rank")
        if r < nx:
            raise RankDeficient(f"rank {r} < |X|={nx}")
        return res.v[:, :nx].T.copy()
    return res.v[:, :r].T.copy()


def projected_operator(w, direction) -> np.ndarray:
    """``w @ (I - d d^T)`` for the unit vector ``d`` along ``direction``."""
    w = _as_matrix(w)
    d = np.asarray(direction, dtype=float).reshape(-1)
    nrm = np.linalg.norm(d)
    if not nrm > 0:
        raise ValueError("direction must be nonzero")
    d = d / nrm
    return w - np.outer(w @ d, d)
