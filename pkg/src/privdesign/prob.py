"""Probability data model: pmfs, column-stochastic channels, budgets, instances.

Orientation is fixed everywhere: a channel matrix stores one conditional pmf
per *column*, so ``P_{X|Y}`` has shape ``(|X|, |Y|)`` and ``P_X = P_{X|Y} @ P_Y``.

All containers are frozen and hold read-only numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    InvalidBudget,
    MixtureMismatch,
    NegativeMass,
    NotNormalized,
    NotStochastic,
    ValidationError,
    ZeroMarginal,
    ZeroSupport,
)

STOCHASTIC_TOL = 1e-9
MIXTURE_TOL = 1e-8
# letters whose probability is at or below this are reported as unused
UNUSED_LETTER_TOL = 1e-12


class Divergence(enum.Enum):
    KL = "kl"
    CHI_SQUARE = "chi2"
    L1 = "l1"

    @classmethod
    def parse(cls, value: "str | Divergence") -> "Divergence":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"chi2": cls.CHI_SQUARE, "chisquare": cls.CHI_SQUARE,
                   "chi_square": cls.CHI_SQUARE, "l1": cls.L1, "kl": cls.KL}
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown divergence {value!r}") from None


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pmf:
    values: np.ndarray
    tol: float = STOCHASTIC_TOL

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values > 0)


def make_pmf(values: Sequence[float], tol: float = STOCHASTIC_TOL) -> Pmf:
    """Validate ``values`` as a pmf; entries within ``tol`` of zero become exact 0."""
    v = np.array(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValidationError("empty pmf")
    if not np.all(np.isfinite(v)):
        raise ValidationError("pmf has non-finite entries")
    if np.any(v < -tol):
        raise NegativeMass(f"entry {v.min():.3g} is below -{tol:g}")
    v[np.abs(v) <= tol] = 0.0
    total = v.sum()
    if abs(total - 1.0) > tol:
        raise NotNormalized(f"pmf sums to {total!r}, not 1 (tol {tol:g})")
    return Pmf(_frozen(v), tol)


@dataclass(frozen=True)
class Channel:
    """Column-stochastic matrix; column ``j`` is the pmf given outcome ``j``."""

    matrix: np.ndarray
    tol: float = STOCHASTIC_TOL

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def column(self, j: int) -> np.ndarray:
        return self.matrix[:, j]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def make_channel(matrix, tol: float = STOCHASTIC_TOL) -> Channel:
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionMismatch(f"channel must be a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("channel has non-finite entries")
    if np.any(m < -tol):
        raise NegativeMass(f"channel entry {m.min():.3g} is below -{tol:g}")
    m[m < 0] = 0.0
    sums = m.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        j = int(bad[0])
        raise NotStochastic(f"column {j} sums to {sums[j]!r}, not 1 (tol {tol:g})")
    return Channel(_frozen(m), tol)


@dataclass(frozen=True)
class BudgetVector:
    epsilons: np.ndarray

    def __len__(self) -> int:
        return len(self.epsilons)

    def __getitem__(self, i):
        return self.epsilons[i]

    @property
    def perfect_letters(self) -> list[int]:
        return [i for i, e in enumerate(self.epsilons) if e == 0.0]


def make_budgets(epsilons: Sequence[float], min_letters: int = 2) -> BudgetVector:
    e = np.array(epsilons, dtype=float).reshape(-1)
    if not np.all(np.isfinite(e)):
        raise InvalidBudget("budgets must be finite")
    if np.any(e < 0):
        raise InvalidBudget("budgets must be nonnegative")
    if np.any(np.diff(e) > 0):
        raise InvalidBudget(
            f"budgets must be non-increasing (eps_1 >= eps_2 >= ... >= eps_K), got {e.tolist()}")
    if len(e) < min_letters:
        raise InvalidBudget(
            f"at least {min_letters} letters are required; with K=1 the mixture "
            "constraint forces zero leakage and zero utility")
    return BudgetVector(_frozen(e))


@dataclass(frozen=True)
class ProblemInstance:
    p_x_given_y: Channel
    p_y: Pmf
    budgets: BudgetVector
    divergence: Divergence
    mixture_tol: float = MIXTURE_TOL

    def __post_init__(self):
        nx, ny = self.p_x_given_y.shape
        if len(self.p_y) != ny:
            raise DimensionMismatch(f"p_y has length {len(self.p_y)}, channel has {ny} columns")
        if self.divergence not in (Divergence.CHI_SQUARE, Divergence.L1):
            raise ValidationError("instance divergence must be chi2 or l1")
        # validates P_X as a pmf
        make_pmf(self.p_x_given_y.matrix @ self.p_y.values, self.p_x_given_y.tol)

    @property
    def nx(self) -> int:
        return self.p_x_given_y.shape[0]

    @property
    def ny(self) -> int:
        return self.p_x_given_y.shape[1]

    @property
    def k(self) -> int:
        return len(self.budgets)

    def with_budgets(self, epsilons: Sequence[float]) -> "ProblemInstance":
        return ProblemInstance(self.p_x_given_y, self.p_y, make_budgets(epsilons),
                               self.divergence, self.mixture_tol)


def make_instance(p_x_given_y, p_y, epsilons, divergence="l1", *,
                  tol: float = STOCHASTIC_TOL, mixture_tol: float = MIXTURE_TOL) -> ProblemInstance:
    return ProblemInstance(make_channel(p_x_given_y, tol), make_pmf(p_y, tol),
                           make_budgets(epsilons), Divergence.parse(divergence), mixture_tol)


def instance_from_joint(p_xy, epsilons, divergence="l1", *, tol: float = STOCHASTIC_TOL,
                        mixture_tol: float = MIXTURE_TOL) -> ProblemInstance:
    """Build an instance from a joint matrix ``P_{XY}`` (rows x, columns y)."""
    joint = np.array(p_xy, dtype=float)
    if joint.ndim != 2:
        raise DimensionMismatch("joint distribution must be a matrix")
    p_y = joint.sum(axis=0)
    if np.any(p_y <= 0):
        raise ZeroSupport("every y must have positive probability to form P_{X|Y}")
    return make_instance(joint / p_y, p_y, epsilons, divergence, tol=tol, mixture_tol=mixture_tol)


def marginal_x(inst: ProblemInstance) -> Pmf:
    """``P_X = P_{X|Y} P_Y``; every entry must be strictly positive."""
    p_x = make_pmf(inst.p_x_given_y.matrix @ inst.p_y.values, inst.p_x_given_y.tol)
    zero = np.flatnonzero(p_x.values <= 0)
    if zero.size:
        raise ZeroMarginal(f"P_X is zero at x={zero.tolist()}")
    return p_x


def bayes_filter(p_u: Pmf, p_y_given_u: Channel, p_y: Pmf,
                 tol: float = MIXTURE_TOL) -> Channel:
    """Recover ``P_{U|Y}`` from ``P_U`` and ``P_{Y|U}`` by Bayes' rule."""
    pyu = p_y_given_u.matrix
    pu = p_u.values
    if pyu.shape != (len(p_y), len(p_u)):
        raise DimensionMismatch(f"P_Y|U has shape {pyu.shape}, expected {(len(p_y), len(p_u))}")
    flow = pyu * pu  # joint P_{Y,U}, shape (|Y|, K)
    mix = flow.sum(axis=1)
    err = np.max(np.abs(mix - p_y.values))
    if err > tol:
        raise MixtureMismatch(f"sum_u P_U(u) P_Y|U(.|u) differs from P_Y by {err:.3g}")
    filt = np.empty((len(pu), len(p_y)))
    for y, py in enumerate(p_y.values):
        if py > 0:
            filt[:, y] = flow[y] / py
        elif np.any(flow[y] > tol):
            raise ZeroSupport(f"P_Y({y}) = 0 but mass flows into it")
        else:
            # unreachable y: any stochastic column is consistent
            filt[:, y] = pu
    filt = np.clip(filt, 0.0, None)
    filt /= filt.sum(axis=0, keepdims=True)
    return make_channel(filt, p_y_given_u.tol)


def forward_from_filter(p_u_given_y: Channel, p_y: Pmf) -> tuple[Pmf, Channel]:
    """Inverse of :func:`bayes_filter`: returns ``(P_U, P_{Y|U})``.

    Columns for letters with ``P_U(u) <= UNUSED_LETTER_TOL`` are filled with
    ``P_Y`` so that the result is still column-stochastic.
    """
    joint = p_u_given_y.matrix * p_y.values  # (K, |Y|)
    pu = joint.sum(axis=1)
    pyu = np.empty((len(p_y), len(pu)))
    for u, w in enumerate(pu):
        pyu[:, u] = joint[u] / w if w > UNUSED_LETTER_TOL else p_y.values
    p_u = make_pmf(pu, max(p_u_given_y.tol, STOCHASTIC_TOL))
    return p_u, make_channel(pyu, max(p_u_given_y.tol, STOCHASTIC_TOL))


@dataclass(frozen=True)
class Perturbation:
    """Direction ``J`` with ``P_{X|U=u} = P_X + eps * J``."""

    j: np.ndarray
    letter_index: int
    eps: float = 0.0

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.j).sum())

    def chi_norm(self, p_x: Pmf) -> float:
        """``||[sqrt P_X]^-1 J||_2``."""
        return float(np.linalg.norm(self.j / np.sqrt(p_x.values)))


def check_perturbation(pert: Perturbation, p_x: Pmf, divergence: Divergence,
                       tol: float = STOCHASTIC_TOL) -> None:
    if abs(pert.j.sum()) > tol:
        raise ValidationError(f"perturbation does not sum to zero ({pert.j.sum():.3g})")
    if divergence is Divergence.L1:
        norm = pert.l1_norm
    elif divergence is Divergence.CHI_SQUARE:
        norm = pert.chi_norm(p_x)
    else:
        raise ValidationError(f"no norm constraint for {divergence}")
    if norm > 1.0 + tol:
        raise BudgetExceeded(
            f"letter {pert.letter_index}: {divergence.value} norm of J is {norm:.6g} > 1")


def perturbation_from_conditional(p_x_given_u, p_x: Pmf, eps: float, *,
                                  divergence: Divergence = Divergence.L1,
                                  letter_index: int = 1,
                                  tol: float = STOCHASTIC_TOL) -> Perturbation:
    if not eps > 0:
        raise InvalidBudget("eps must be positive to define a perturbation direction")
    cond = np.asarray(getattr(p_x_given_u, "values", p_x_given_u), dtype=float)
    if cond.shape != p_x.values.shape:
        raise DimensionMismatch("conditional and marginal differ in length")
    j = (cond - p_x.values) / eps
    pert = Perturbation(_frozen(j), letter_index, float(eps))
    check_perturbation(pert, p_x, divergence, tol)
    return pert


def zero_perturbation(nx: int, letter_index: int, eps: float = 0.0) -> Perturbation:
    return Perturbation(_frozen(np.zeros(nx)), letter_index, eps)


@dataclass(frozen=True)
class MechanismDesign:
    """A designed mechanism with its exact and approximate utilities (nats).

    ``perturbations[i]`` is ``None`` for unused letters; their ``P_{Y|U}``
    column holds ``P_Y`` as a placeholder and their ``P_{U|Y}`` row is zero.
    """

    p_u: Pmf
    p_y_given_u: Channel
    p_u_given_y: Channel
    perturbations: tuple[Optional[Perturbation], ...]
    exact_utility: float
    approx_utility: float
    leakages: np.ndarray
    budgets: BudgetVector
    divergence: Divergence
    mode: str = ""
    assignment: Optional[tuple[int, ...]] = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def used_letters(self) -> list[int]:
        return [i for i, w in enumerate(self.p_u.values) if w > UNUSED_LETTER_TOL]

    @property
    def exact_utility_bits(self) -> float:
        return self.exact_utility / np.log(2.0)

    @property
    def approx_utility_bits(self) -> float:
        return self.approx_utility / np.log(2.0)
