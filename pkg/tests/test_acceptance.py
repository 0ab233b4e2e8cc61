"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""

import contextlib
import io
import sys
import time
import warnings

import numpy as np
import pytest

from privdesign import cli, measures
from privdesign.errors import NoFeasibleAssignment
from privdesign.invertible import design_invertible
from privdesign.linalg import pseudo_inverse
from privdesign.oracle import OracleConfig, brute_force
from privdesign.polytope import Mode, design_lp
from privdesign.prob import make_instance, marginal_x
from privdesign.reference import PUBLISHED, reference_instance, run_reference

from conftest import random_full_row_rank, random_invertible, symmetric_channel
from invariants import check_invertible_design, residuals, vertex_residual

SEED = 20240611


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, what: str, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {what}: {detail}")
    return emit


def sigma_max(inst) -> float:
    """Largest singular value of W restricted to the complement of sqrt(P_X)."""
    p = inst.p_x_given_y.matrix
    s = np.sqrt(marginal_x(inst).values)
    w = np.diag(1 / np.sqrt(inst.p_y.values)) @ np.linalg.inv(p) @ np.diag(s)
    proj = np.eye(len(s)) - np.outer(s, s)
    return float(np.linalg.svd(w @ proj, compute_uv=False)[0])


def random_chi2(rng, n, k, lo=1e-3, hi=1e-2):
    eps1 = rng.uniform(lo, hi)
    eps = np.sort(np.concatenate([[eps1], rng.uniform(0.1 * eps1, eps1, size=k - 1)]))[::-1]
    return make_instance(random_invertible(rng, n), rng.dirichlet(np.ones(n) * 3), eps, "chi2")


def random_l1(rng, ny, k, lo=1e-3, hi=1e-2, zeros=0):
    eps = np.sort(rng.uniform(lo, hi, size=k))[::-1]
    if zeros:
        eps[k - zeros:] = 0.0
    return make_instance(random_full_row_rank(rng, 2, ny), rng.dirichlet(np.ones(ny) * 2),
                         eps, "l1")


def test_criterion_1_golden_reproduction(report):
    t0 = time.perf_counter()
    with contextlib.redirect_stdout(io.StringIO()):
        code = cli.main(["reproduce-example"])
    elapsed = time.perf_counter() - t0
    run = run_reference()
    failed = [c for c in run.checks if not c.ok]
    ok = code == 0 and not failed and elapsed < 5
    detail = f"exit {code}, {elapsed:.2f} s, {len(run.checks) - len(failed)}/{len(run.checks)} checks"
    if failed:
        detail += "; off: " + ", ".join(
            f"{c.name} {c.computed:.4f} vs {c.published:.4f}" for c in failed)
    report(1, ok, "golden reproduction", detail)
    assert ok


def test_criterion_2_closed_form(report):
    rng = np.random.default_rng(SEED)
    worst_formula, worst_chi2, elapsed = 0.0, -np.inf, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        inst = random_chi2(rng, n, int(rng.integers(2, n + 1)))
        t0 = time.perf_counter()
        d = design_invertible(inst)
        elapsed += time.perf_counter() - t0
        eps = inst.budgets.epsilons
        expected = 0.5 * eps[0] * eps[1] * sigma_max(inst) ** 2
        worst_formula = max(worst_formula, abs(d.approx_utility - expected))
        pxu = inst.p_x_given_y.matrix @ d.p_y_given_u.matrix
        p_x = marginal_x(inst)
        for i in d.used_letters:
            worst_chi2 = max(worst_chi2, measures.chi_square(pxu[:, i], p_x) - eps[i] ** 2)
    ok = worst_formula <= 1e-12 and worst_chi2 <= 1e-10 and elapsed < 1
    report(2, ok, "closed-form identity",
           f"max |approx - formula| {worst_formula:.1e}, max chi2 excess {worst_chi2:.1e}, "
           f"{elapsed:.2f} s")
    assert ok


def test_criterion_3_second_order(report):
    ratios = []
    for second in (1.0, 0.5):
        def gap(e1):
            inst = make_instance(symmetric_channel(0.3), [0.5, 0.5], [e1, second * e1], "chi2")
            d = design_invertible(inst)
            return abs(d.exact_utility - d.approx_utility)
        ratios += [gap(e) / gap(e / 2) for e in (0.02, 0.01, 0.005)]
    ok = min(ratios) >= 3.5
    report(3, ok, "second-order accuracy",
           "gap ratios under halving " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok


def test_criterion_4_two_letter_support(report):
    rng = np.random.default_rng(SEED + 4)
    bad = 0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(3, 6))
        inst = random_chi2(rng, n, k)
        eps = inst.budgets.epsilons.copy()
        eps[2:] = np.minimum(eps[2:], 0.9 * eps[1])  # strict eps_3 < eps_2
        d = design_invertible(inst.with_budgets(eps))
        if d.used_letters != [0, 1]:
            bad += 1
    ok = bad == 0
    report(4, ok, "two-letter support", f"{50 - bad}/50 instances use exactly u1, u2")
    assert ok


def _sandwich(designer, inst, utility):
    eps = inst.budgets.epsilons
    k = len(eps)
    lo = utility(designer(inst.with_budgets([eps[-1]] * k)))
    mid = utility(designer(inst))
    hi = utility(designer(inst.with_budgets([eps[0]] * k)))
    return min(mid - lo, hi - mid)


def test_criterion_5_sandwich(report):
    rng = np.random.default_rng(SEED + 5)
    worst = {}
    for _ in range(20):
        n = int(rng.integers(2, 5))
        inst = random_chi2(rng, n, int(rng.integers(2, n + 2)))
        for name, util in (("exact", lambda d: d.exact_utility),
                           ("approx", lambda d: d.approx_utility)):
            key = f"invertible/{name}"
            worst[key] = min(worst.get(key, np.inf), _sandwich(design_invertible, inst, util))
    done = 0
    while done < 20:
        inst = random_l1(rng, int(rng.integers(3, 5)), 4)
        try:
            slack = {name: _sandwich(design_lp, inst, util) for name, util in
                     (("exact", lambda d: d.exact_utility), ("approx", lambda d: d.approx_utility))}
        except NoFeasibleAssignment:
            continue
        done += 1
        for name, s in slack.items():
            worst[f"lp/{name}"] = min(worst.get(f"lp/{name}", np.inf), s)
    ok = all(v >= -1e-6 for v in worst.values())
    report(5, ok, "sandwich bounds",
           "smallest slack " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_6_oracle_band(report):
    rng = np.random.default_rng(SEED + 6)
    cfg = OracleConfig(grid_step=0.02)
    gaps = []
    t0 = time.perf_counter()
    for case in range(10):
        if case < 5:
            n = 2 + case % 2
            inst = random_chi2(rng, n, 2)
            designer = design_invertible(inst)
        else:
            inst = make_instance(random_invertible(rng, 2), rng.dirichlet([3, 3]),
                                 np.sort(rng.uniform(1e-3, 1e-2, 2))[::-1], "l1")
            designer = design_lp(inst)
        oracle = brute_force(inst, cfg)
        gaps.append((designer.exact_utility - oracle.exact_utility,
                     oracle.exact_utility - designer.exact_utility))
    elapsed = time.perf_counter() - t0
    worst_d = min(g[0] for g in gaps)
    worst_o = min(g[1] for g in gaps)
    ok = worst_d >= -5e-3 and worst_o >= -5e-3 and elapsed < 60
    report(6, ok, "oracle consistency",
           f"min(designer - oracle) {worst_d:.2e} nats, min(oracle - designer) {worst_o:.2e} nats, "
           f"{elapsed:.1f} s")
    assert ok


def test_criterion_7_pseudo_inverse(report):
    rng = np.random.default_rng(SEED + 7)
    worst_ident = 0.0
    for _ in range(100):
        nx = int(rng.integers(2, 5))
        p = random_full_row_rank(rng, nx, nx + int(rng.integers(0, 4)))
        worst_ident = max(worst_ident, float(np.abs(np.ones(p.shape[1]) @ pseudo_inverse(p)
                                                    - np.ones(nx)).max()))
    worst_design, done = 0.0, 0
    while done < 20:
        inst = random_l1(rng, int(rng.integers(3, 5)), 3, zeros=int(rng.integers(0, 2)))
        try:
            frr = design_lp(inst, Mode.FULL_ROW_RANK)
        except NoFeasibleAssignment:
            continue
        pinv = design_lp(inst, Mode.PSEUDO_INVERSE)
        done += 1
        worst_design = max(worst_design, abs(pinv.approx_utility - frr.approx_utility),
                           abs(pinv.exact_utility - frr.exact_utility))
    ok = worst_ident <= 1e-9 and worst_design <= 1e-6
    report(7, ok, "pseudo-inverse identities",
           f"max |1'P+ - 1'| {worst_ident:.1e}, max pinv/frr utility gap {worst_design:.1e}")
    assert ok


def test_criterion_8_hybrid_perfect_privacy(report):
    run = run_reference()
    d = run.published_design
    inst = reference_instance()
    leak = float(d.leakages[3])
    weight = float(d.p_u.values[3])
    target = PUBLISHED.p_u[3]
    ok = leak <= 1e-12 and abs(weight - target) <= 1e-3 and inst.budgets[3] == 0
    report(8, ok, "hybrid perfect privacy",
           f"u4 leakage {leak:.1e}, P_U(u4) {weight:.6f} vs {target} "
           f"(best assignment gives {run.best_design.p_u.values[3]:.6f})")
    assert ok


def test_criterion_9_invariants(report):
    rng = np.random.default_rng(SEED + 9)
    worst = {"zero_sum": 0.0, "balance": 0.0, "mixture": 0.0, "vertex": 0.0}
    designs = skipped = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for case in range(1000):
            if case % 2 == 0:
                n = int(rng.integers(2, 5))
                inst = random_chi2(rng, n, int(rng.integers(2, n + 2)))
                d = design_invertible(inst)
                check_invertible_design(d, inst)
            else:
                k = int(rng.integers(2, 5))
                inst = random_l1(rng, int(rng.integers(3, 5)), k, lo=0.0,
                                 zeros=int(rng.integers(0, k - 1)))
                mode = Mode.FULL_ROW_RANK if case % 4 == 1 else Mode.PSEUDO_INVERSE
                try:
                    d = design_lp(inst, mode)
                except NoFeasibleAssignment:
                    skipped += 1
                    continue
                worst["vertex"] = max(worst["vertex"], vertex_residual(d, inst, mode))
            designs += 1
            for key, v in residuals(d, inst).items():
                worst[key] = max(worst[key], v)
    ok = (worst["zero_sum"] <= 1e-7 and worst["balance"] <= 1e-7
          and worst["mixture"] <= 1e-8 and worst["vertex"] <= 1e-7)
    report(9, ok, "invariant suite",
           f"{designs} designs ({skipped} LP cases infeasible); worst " +
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
