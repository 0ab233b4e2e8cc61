import numpy as np
import pytest

from privdesign import measures
from privdesign.errors import NoFeasibleAssignment, OracleSizeExceeded, ValidationError
from privdesign.invertible import design_invertible
from privdesign.oracle import CHECK_TOL, OracleConfig, brute_force, default_config, grid_size
from privdesign.polytope import design_lp
from privdesign.prob import make_instance, marginal_x

from conftest import HYBRID_P, HYBRID_PY, symmetric_channel


def duplicate_columns():
    # y1 and y2 are indistinguishable through X: U may reveal which one occurred
    return make_instance([[0.2, 0.2, 0.7], [0.8, 0.8, 0.3]], [0.25, 0.25, 0.5], [0.0, 0.0], "l1")


def symmetric(eps):
    return make_instance(symmetric_channel(0.3), [0.5, 0.5], eps, "chi2")


def assert_feasible(d, inst):
    p_x = marginal_x(inst)
    pxu = inst.p_x_given_y.matrix @ d.p_y_given_u.matrix
    for u in d.used_letters:
        eps = inst.budgets[u]
        if inst.divergence.value == "l1":
            assert measures.l1(pxu[:, u], p_x) <= eps + CHECK_TOL
        else:
            assert measures.chi_square(pxu[:, u], p_x) <= eps ** 2 + CHECK_TOL
    mix = d.p_y_given_u.matrix @ d.p_u.values
    assert np.abs(mix - inst.p_y.values).max() <= 1e-12


def test_perfect_privacy_half_bit():
    d = brute_force(duplicate_columns())
    assert measures.to_bits(d.exact_utility) == pytest.approx(0.5, abs=1e-12)
    assert d.mode == "oracle-grid"
    assert_feasible(d, duplicate_columns())


def test_symmetric_chi2_agrees_with_designer():
    inst = symmetric([0.01, 0.01])
    oracle = brute_force(inst, OracleConfig(grid_step=0.02))
    designer = design_invertible(inst)
    assert oracle.exact_utility >= designer.exact_utility - 2e-3
    assert designer.exact_utility >= oracle.exact_utility - 2e-3
    assert_feasible(oracle, inst)


def test_beats_restricted_lp_on_reference():
    # two letters only: mixing vertices cannot reach P_Y within budget,
    # but general filters can
    inst = make_instance(HYBRID_P, HYBRID_PY, [0.01, 0.01], "l1")
    with pytest.raises(NoFeasibleAssignment):
        design_lp(inst)
    d = brute_force(inst, OracleConfig(grid_step=0.05))
    assert d.exact_utility > 0.0
    assert_feasible(d, inst)


def test_random_mode_is_seeded():
    inst = symmetric([0.05, 0.05])
    cfg = OracleConfig(random=True, max_random_samples=20_000, seed=3)
    a, b = brute_force(inst, cfg), brute_force(inst, cfg)
    assert a.p_y_given_u.matrix.tobytes() == b.p_y_given_u.matrix.tobytes()
    assert a.mode == "oracle-random"
    assert_feasible(a, inst)


def test_grid_is_deterministic():
    inst = symmetric([0.05, 0.05])
    a, b = brute_force(inst), brute_force(inst)
    assert a.p_y_given_u.matrix.tobytes() == b.p_y_given_u.matrix.tobytes()


def test_constant_filter_floor():
    # a zero budget on a channel with distinct columns leaves only the constant filter
    inst = make_instance(symmetric_channel(0.3), [0.5, 0.5], [0.0, 0.0], "l1")
    d = brute_force(inst)
    assert d.exact_utility == 0.0
    assert d.used_letters == [0]


def test_grid_limits():
    big_y = make_instance(np.full((2, 5), 0.5), np.full(5, 0.2), [0.1, 0.1], "l1")
    with pytest.raises(OracleSizeExceeded):
        brute_force(big_y)
    many_letters = make_instance(HYBRID_P, HYBRID_PY, [0.1] * 4, "l1")
    with pytest.raises(OracleSizeExceeded):
        brute_force(many_letters)
    fine = make_instance(HYBRID_P, HYBRID_PY, [0.1] * 3, "l1")
    with pytest.raises(OracleSizeExceeded):
        brute_force(fine, OracleConfig(grid_step=0.01))


@pytest.mark.parametrize("step", [0.0, 1.0, 0.03, -0.1])
def test_bad_step(step):
    with pytest.raises(ValidationError):
        OracleConfig(grid_step=step)


def test_grid_size_and_defaults():
    inst = symmetric([0.01, 0.01])
    assert grid_size(inst, OracleConfig(grid_step=0.5)) == 9
    assert not default_config(inst).random
    assert default_config(make_instance(HYBRID_P, HYBRID_PY, [0.1] * 3, "l1")).random
