import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.chains.generators import make_phased
from app.chains.model import MG1Model
from app.chains.tails import ParetoTail
from app.errors import NotFiniteSupport, NotIrreducible
from app.settings import Settings
from app.solvers.oracle import (
    FiniteChain,
    build_finite,
    deviation_H,
    h_identity_residual,
    oracle_bundle,
    solve_stationary,
    truncation_delta,
    u_closed_form,
    verify_difference_formula,
    verify_h_blocks,
    verify_u,
)
from app.solvers.mam import compute_G


def test_flip_chain_deviation():
    chain = FiniteChain.from_matrix([[0.0, 1.0], [1.0, 0.0]])
    pi = solve_stationary(chain)
    assert_allclose(pi, [0.5, 0.5], atol=1e-15)
    h = deviation_H(chain, pi, anchor=(0, 0))
    assert h[1, 1] == pytest.approx(0.5)
    assert h_identity_residual(chain, pi, h) < 1e-14


def test_scalar_finite_chain(scalar_model):
    chain = build_finite(scalar_model, 3)
    assert chain.size == 4
    pi = solve_stationary(chain)
    assert_allclose(pi @ chain.p, pi, atol=1e-15)
    assert_allclose(chain.block(chain.p, 1, 0), [[0.6]])


def test_reducible_chain_rejected():
    chain = FiniteChain.from_matrix([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotIrreducible):
        solve_stationary(chain)


def test_bundle_identity(cut_model):
    bundle = oracle_bundle(cut_model, 80)
    assert bundle.h_residual < 1e-9
    assert bundle.f_plus.shape == (80, 80)
    assert np.all(bundle.hitting_times > 0)
    assert_allclose(bundle.f_plus.sum(axis=1), bundle.hitting_times, atol=1e-9)


def test_u_closed_form_scalar(scalar_model):
    g_result = compute_G(scalar_model)
    assert_allclose(u_closed_form(scalar_model, g_result, 4), [10.0], atol=1e-12)
    with pytest.raises(ValueError):
        u_closed_form(scalar_model, g_result, 0)


def test_verify_u_against_hitting_times(scalar_model, cut_model):
    report = verify_u(scalar_model, 4, 400)
    assert report["abs_error"] < 1e-6
    assert report["u_oracle"][0] == pytest.approx(10.0, abs=1e-6)
    assert verify_u(cut_model, 3, 400)["rel_error"] < 1e-6


def test_difference_formula_scalar(scalar_model):
    report = verify_difference_formula(scalar_model, 3, 1, 600)
    assert report["residual"] < 1e-12
    assert report["lhs_l1"] < 1e-12
    assert report["within_bound"]


@pytest.mark.parametrize("k", [0, 1, 3])
def test_difference_formula_cut_pareto(cut_model, k):
    report = verify_difference_formula(cut_model, 6, k, 600)
    assert report["bias"] < 1e-6
    assert report["residual"] < 1e-6
    assert report["lhs_l1"] > 0
    assert report["within_bound"]
    assert report["lhs_l1"] <= report["bound_l1"] + 1e-9


def test_difference_formula_needs_finite_support(pareto_model):
    with pytest.raises(NotFiniteSupport):
        verify_difference_formula(pareto_model, 6, 1, 600)


def test_difference_formula_level_cap(cut_model):
    with pytest.raises(ValueError):
        verify_difference_formula(cut_model, 6, 1, 18)


def test_difference_formula_anchor_independent(cut_model):
    default = verify_difference_formula(cut_model, 6, 2, 400)
    moved = verify_difference_formula(cut_model, 6, 2, 400, anchor=(5, 0), settings=Settings())
    assert_allclose(default["rhs"], moved["rhs"], atol=1e-9)


def test_truncation_delta_pattern(cut_model):
    report = truncation_delta(cut_model, 6, 40)
    assert report["match"]
    assert report["value_error"] < 1e-14
    assert (1, 7) in report["observed"]
    assert not any(row == 0 for row, _ in report["observed"])


def test_truncation_delta_boundary_rows():
    model = MG1Model(
        m0=1, m1=1,
        a_blocks=([[0.6]], [[0.2]], [[0.1]], [[0.1]]),
        b_down=[[0.6]],
        b_blocks=([[0.4]], [[0.3]], [[0.2]], [[0.1]]),
    )
    report = truncation_delta(model, 1, 12)
    assert report["match"]
    assert (0, 1) in report["observed"] and (0, 3) in report["observed"]


def test_h_blocks(cut_model):
    report = verify_h_blocks(cut_model, 4, 1, 300)
    assert report["residual"] < 1e-6
    report = verify_h_blocks(cut_model, 3, 0, 300)
    assert report["residual"] < 1e-6


@pytest.mark.parametrize("m", range(1, 7))
def test_u_linear_in_level(scalar_model, m):
    report = verify_u(scalar_model, m, 400)
    assert report["u_closed"][0] == pytest.approx(2.5 * m, abs=1e-12)
    assert report["abs_error"] < 1e-6


def test_u_phased_model():
    model = make_phased(1, 2, seed=4, tail_family=None, drift_target=-0.3)
    assert verify_u(model, 3, 600)["rel_error"] < 1e-3


def test_difference_formula_residual_shrinks_with_level_cap(cut_model):
    # 误差已在舍入量级时只要求不超过 1e-12
    coarse = verify_difference_formula(cut_model, 6, 1, 600)["residual"]
    fine = verify_difference_formula(cut_model, 6, 1, 1200)["residual"]
    assert fine <= max(coarse / 10.0, 1e-12)


@pytest.mark.slow
def test_u_phased_pareto_model_long_chain():
    model = make_phased(1, 2, seed=4, tail_family=ParetoTail(3.0), drift_target=-0.3)
    report = verify_u(model, 3, 2000)
    assert report["rel_error"] < 1e-3


@pytest.mark.slow
def test_u_pareto_long_chain(pareto_model):
    assert verify_u(pareto_model, 3, 2000)["rel_error"] < 1e-3
