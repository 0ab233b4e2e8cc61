"""Brute-force search over filters ``P_{U|Y}`` for tiny instances.

Constraints are evaluated exactly (no linearisation). The chi-square budget
uses the same convention as the designers: ``chi2 <= eps**2``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import measures
from .errors import NoFeasibleFilter, OracleSizeExceeded, ValidationError
from .prob import (
    UNUSED_LETTER_TOL,
    Divergence,
    MechanismDesign,
    ProblemInstance,
    forward_from_filter,
    make_channel,
    marginal_x,
    perturbation_from_conditional,
)

log = logging.getLogger(__name__)

CHECK_TOL = 1e-12
CHUNK = 200_000
MAX_GRID_FILTERS = 20_000_000
MAX_GRID_Y = 4
MAX_GRID_K = 3


@dataclass(frozen=True)
class OracleConfig:
    grid_step: float = 0.05
    max_random_samples: int = 1_000_000
    seed: int = 0
    random: bool = False

    def __post_init__(self):
        if not 0 < self.grid_step < 1:
            raise ValidationError("grid_step must lie in (0, 1)")
        n = round(1 / self.grid_step)
        if abs(n * self.grid_step - 1) > 1e-12:
            raise ValidationError(f"grid_step {self.grid_step} does not divide 1")
        if self.max_random_samples <= 0:
            raise ValidationError("max_random_samples must be positive")

    @property
    def levels(self) -> int:
        return round(1 / self.grid_step)


def default_config(inst: ProblemInstance, seed: int = 0) -> OracleConfig:
    """Grid search with step 0.05 for very small filters, random search otherwise."""
    return OracleConfig(grid_step=0.05, seed=seed, random=inst.ny * inst.k > 8)


def grid_size(inst: ProblemInstance, cfg: OracleConfig) -> int:
    per_column = math.comb(cfg.levels + inst.k - 1, inst.k - 1)
    return per_column ** inst.ny


def _simplex_grid(levels: int, k: int) -> np.ndarray:
    """All points of the simplex grid with spacing 1/levels, lexicographic."""
    pts = [c for c in itertools.product(range(levels + 1), repeat=k - 1) if sum(c) <= levels]
    arr = np.array([(*c, levels - sum(c)) for c in pts], dtype=float)
    return arr / levels


def _grid_filters(inst: ProblemInstance, cfg: OracleConfig) -> Iterator[np.ndarray]:
    cols = _simplex_grid(cfg.levels, inst.k)  # (G, K)
    g = len(cols)
    total = g ** inst.ny
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(start + CHUNK, total))
        digits = np.empty((len(flat), inst.ny), dtype=np.int64)
        rest = flat.copy()
        for y in range(inst.ny - 1, -1, -1):
            digits[:, y] = rest % g
            rest //= g
        # (B, K, |Y|)
        yield np.transpose(cols[digits], (0, 2, 1))


def _random_filters(inst: ProblemInstance, cfg: OracleConfig) -> Iterator[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    left = cfg.max_random_samples
    while left > 0:
        b = min(CHUNK, left)
        left -= b
        yield np.transpose(rng.dirichlet(np.ones(inst.k), size=(b, inst.ny)), (0, 2, 1))


def _score(filters: np.ndarray, inst: ProblemInstance, p_x: np.ndarray):
    """Utility (nats) and feasibility of a batch of filters of shape (B, K, |Y|)."""
    p_y = inst.p_y.values
    joint = filters * p_y  # P_{U,Y}
    p_u = joint.sum(axis=2)  # (B, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, filters / p_u[:, :, None], 1.0)
        util = np.sum(np.where(joint > 0, joint * np.log(ratio), 0.0), axis=(1, 2))
        pxu = np.einsum("xy,bky->bkx", inst.p_x_given_y.matrix, joint) / p_u[:, :, None]
    diff = pxu - p_x
    if inst.divergence is Divergence.L1:
        leak = np.abs(diff).sum(axis=2)
        bound = inst.budgets.epsilons
    else:
        leak = (diff ** 2 / p_x).sum(axis=2)
        bound = inst.budgets.epsilons ** 2
    used = p_u > UNUSED_LETTER_TOL
    ok = np.all(~used | (np.nan_to_num(leak, nan=np.inf) <= bound + CHECK_TOL), axis=1)
    return util, ok


def brute_force(inst: ProblemInstance, cfg: OracleConfig = OracleConfig()) -> MechanismDesign:
    p_x = marginal_x(inst).values
    use_random = cfg.random
    if not use_random:
        if inst.ny > MAX_GRID_Y or inst.k > MAX_GRID_K:
            raise OracleSizeExceeded(
                f"grid mode supports |Y| <= {MAX_GRID_Y} and K <= {MAX_GRID_K}, "
                f"got |Y|={inst.ny}, K={inst.k}; use random mode")
        if grid_size(inst, cfg) > MAX_GRID_FILTERS:
            raise OracleSizeExceeded(
                f"grid has {grid_size(inst, cfg)} filters (limit {MAX_GRID_FILTERS}); "
                "use a coarser step or random mode")
    batches = _random_filters(inst, cfg) if use_random else _grid_filters(inst, cfg)

    # constant filter: always feasible, utility 0
    best_util = 0.0
    best = np.zeros((inst.k, inst.ny))
    best[0] = 1.0
    for batch in batches:
        util, ok = _score(batch, inst, p_x)
        if not ok.any():
            continue
        cand = np.where(ok, util, -np.inf)
        i = int(np.argmax(cand))
        if cand[i] > best_util:
            best_util = float(cand[i])
            best = batch[i]
    return _as_design(best, inst, p_x, "oracle-random" if use_random else "oracle-grid")


def _as_design(filt: np.ndarray, inst: ProblemInstance, p_x: np.ndarray,
               mode: str) -> MechanismDesign:
    channel = make_channel(filt)
    p_u, pyu = forward_from_filter(channel, inst.p_y)
    p_x_pmf = marginal_x(inst)
    pxu = inst.p_x_given_y.matrix @ pyu.matrix
    leak = np.zeros(inst.k)
    perts = []
    for u in range(inst.k):
        if p_u.values[u] <= UNUSED_LETTER_TOL:
            perts.append(None)
            continue
        leak[u] = measures.divergence(inst.divergence, pxu[:, u], p_x_pmf)
        bound = inst.budgets[u] if inst.divergence is Divergence.L1 else inst.budgets[u] ** 2
        if leak[u] > bound + CHECK_TOL:
            raise NoFeasibleFilter(f"oracle result violates letter {u + 1}")
        eps = float(inst.budgets[u])
        if eps > 0:
            perts.append(perturbation_from_conditional(
                pxu[:, u], p_x_pmf, eps, divergence=inst.divergence, letter_index=u + 1,
                tol=1e-6))
        else:
            perts.append(None)
    exact = measures.mutual_information(p_u, pyu, inst.p_y, inst.mixture_tol)
    return MechanismDesign(p_u, pyu, channel, tuple(perts), exact, exact, leak,
                           inst.budgets, inst.divergence, mode=mode)
