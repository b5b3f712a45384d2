import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from app.chains.generators import make_scalar
from app.chains.model import MG1Model, ParametricTail, row_sum_defect, validate
from app.chains.tails import ParetoTail
from app.errors import DimensionMismatch, InvalidTail

ZETA3 = float(special.zeta(3.0, 1.0))


def test_scalar_moments(scalar_model):
    assert scalar_model.sigma == pytest.approx(-0.4)
    assert_allclose(scalar_model.m_bar_b(), [0.5])
    assert_allclose(scalar_model.m_bar_a_plus(), [0.2])
    assert_allclose(scalar_model.varpi, [1.0])
    assert scalar_model.support_levels == 1
    assert scalar_model.is_finite_support


def test_pareto_blocks_follow_tail_pmf(pareto_model):
    assert_allclose(pareto_model.block_a(-1), [[0.7]])
    assert_allclose(pareto_model.block_a(0), [[0.0]])
    assert_allclose(pareto_model.block_a(1), [[0.2625]])
    assert_allclose(pareto_model.tail_a(3), [[0.3 / 64]])
    assert_allclose(pareto_model.a_total, [[1.0]])


def test_pareto_drift_and_double_tail(pareto_model):
    assert pareto_model.sigma == pytest.approx(-0.7 + 0.3 * ZETA3, rel=1e-12)
    assert pareto_model.sigma == pytest.approx(-0.339383, abs=1e-6)
    assert_allclose(pareto_model.double_tail_a(0), [[0.3 * (ZETA3 - 1.0)]], rtol=1e-12)
    assert pareto_model.has_parametric_tail


def test_double_tail_matches_explicit_sum(pareto_model):
    direct = pareto_model.tail_a_stack(6, 200_000).sum()
    assert pareto_model.double_tail_a(5)[0, 0] == pytest.approx(direct, rel=1e-6)


def test_stacks_agree_with_single_blocks(pareto_model):
    stack = pareto_model.a_stack(6)
    for j in range(8):
        assert_allclose(stack[j], pareto_model.block_a(j - 1), atol=1e-16)
    tails = pareto_model.tail_a_stack(-1, 6)
    for i, k in enumerate(range(-1, 7)):
        assert_allclose(tails[i], pareto_model.tail_a(k), atol=1e-16)


def test_assemble_scalar_small_chain(scalar_model):
    p = scalar_model.assemble(3)
    expected = np.array([
        [0.5, 0.5, 0.0, 0.0],
        [0.6, 0.2, 0.2, 0.0],
        [0.0, 0.6, 0.2, 0.2],
        [0.0, 0.0, 0.6, 0.4],
    ])
    assert_allclose(p, expected, atol=1e-15)


def test_assemble_rows_are_stochastic(pareto_model):
    p = pareto_model.assemble(20)
    assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    unaugmented = pareto_model.assemble(20, augment=False)
    assert np.all(unaugmented.sum(axis=1) <= 1.0 + 1e-12)


def test_row_sum_defect(scalar_model, pareto_model):
    assert row_sum_defect(scalar_model) < 1e-14
    assert row_sum_defect(pareto_model) < 1e-12


def test_validate_scalar(scalar_model):
    report = validate(scalar_model)
    assert report.ok
    assert report.irreducible_P and report.irreducible_A
    assert report.to_dict()["sigma"] == pytest.approx(-0.4)


def test_validate_flags_positive_drift():
    model = make_scalar(0.2, [0.2, 0.6])
    report = validate(model)
    assert not report.ok
    assert report.has("positive drift")
    assert report.sigma == pytest.approx(0.4)


def test_validate_flags_row_sum():
    model = MG1Model(
        m0=1, m1=1,
        a_blocks=([[0.5]], [[0.2]], [[0.2]]),
        b_down=[[0.5]],
        b_blocks=([[0.5]], [[0.5]]),
    )
    report = validate(model)
    assert report.has("level row sum")
    assert report.has("level-1 row sum")


def test_validate_flags_infinite_mean():
    tail = ParametricTail(ParetoTail(1.0, 1.0), np.array([0.3]), np.array([1.0]))
    model = MG1Model(m0=1, m1=1, a_blocks=([[0.7]],), b_down=[[0.7]], b_blocks=([[0.5]], [[0.5]]), a_tail=tail)
    assert validate(model).has("infinite mean")


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        MG1Model(m0=1, m1=2, a_blocks=([[0.5]],), b_down=[[0.5], [0.5]], b_blocks=([[1.0]],))


def test_tail_profile_must_be_probability():
    with pytest.raises(InvalidTail):
        ParametricTail(ParetoTail(3.0), np.array([0.3]), np.array([0.5]))


def test_blocks_are_read_only(scalar_model):
    with pytest.raises(ValueError):
        scalar_model.a_blocks[0][0, 0] = 1.0
