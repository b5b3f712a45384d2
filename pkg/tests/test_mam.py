import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.chains.generators import make_phased, make_scalar, preset
from app.chains.tails import ParetoTail
from app.errors import DriftNonNegative, HorizonTooShort
from app.solvers.mam import boundary_matrices, compute_G, r_matrices, ramaswami_pi
from app.solvers.oracle import build_finite, solve_stationary


def test_scalar_g_and_boundary(scalar_model):
    g_result = compute_G(scalar_model)
    assert_allclose(g_result.g_matrix, [[1.0]], atol=1e-12)
    assert g_result.row_sum_defect < 1e-12
    boundary = boundary_matrices(scalar_model, g_result)
    assert_allclose(boundary.phi0, [[0.4]], atol=1e-12)
    assert_allclose(boundary.k_matrix, [[1.0]], atol=1e-12)


def test_scalar_r_matrices(scalar_model):
    g_result = compute_G(scalar_model)
    (r1, r01), (r2, r02) = r_matrices(scalar_model, g_result, boundary_matrices(scalar_model, g_result), 2)
    assert_allclose(r1, [[1.0 / 3.0]], atol=1e-12)
    assert_allclose(r01, [[5.0 / 6.0]], atol=1e-12)
    assert_allclose(r2, [[0.0]], atol=1e-12)
    assert_allclose(r02, [[0.0]], atol=1e-12)


def test_scalar_closed_form(scalar_model):
    solution = ramaswami_pi(scalar_model, 2)
    assert_allclose(solution.pi(0), [4.0 / 9.0], atol=1e-12)
    assert_allclose(solution.pi(1), [10.0 / 27.0], atol=1e-12)
    assert_allclose(solution.pi(2), [10.0 / 81.0], atol=1e-12)
    assert_allclose(solution.pi_bar0, [5.0 / 9.0], atol=1e-12)
    assert solution.total_mass == pytest.approx(1.0, abs=1e-12)
    assert solution.residual < 1e-12


def test_tail_beyond_and_horizon(scalar_model):
    solution = ramaswami_pi(scalar_model, 30)
    assert solution.tail_beyond(0) == pytest.approx(5.0 / 9.0, abs=1e-12)
    assert solution.tail_beyond(1) == pytest.approx(5.0 / 9.0 - 10.0 / 27.0, abs=1e-12)
    assert solution.mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(HorizonTooShort):
        solution.pi(31)


def test_down_only_chain():
    model = make_scalar(1.0, [])
    solution = ramaswami_pi(model, 3)
    assert_allclose(solution.pi(0), [2.0 / 3.0], atol=1e-12)
    assert_allclose(solution.pi(1), [1.0 / 3.0], atol=1e-12)
    assert_allclose(solution.pi(2), [0.0], atol=1e-14)


def test_pareto_horizon_zero(pareto_model):
    solution = ramaswami_pi(pareto_model, 0)
    sigma = pareto_model.sigma
    assert solution.horizon == 0
    assert_allclose(solution.pi0, [-sigma / (0.5 - sigma)], rtol=1e-10)
    assert solution.total_mass == pytest.approx(1.0, abs=1e-10)


def test_cut_model_matches_dense_solve(cut_model):
    solution = ramaswami_pi(cut_model, 40)
    dense = build_finite(cut_model, 400).split(solve_stationary(build_finite(cut_model, 400)))
    for k in range(41):
        assert_allclose(solution.pi(k), dense[k], atol=1e-10)


def test_phased_model_balance():
    model = make_phased(2, 3, seed=3, tail_family=ParetoTail(3.0), drift_target=-0.3)
    g_result = compute_G(model)
    assert g_result.row_sum_defect < 1e-10
    assert g_result.residual < 1e-10
    solution = ramaswami_pi(model, 60)
    assert solution.residual < 1e-9
    assert solution.total_mass == pytest.approx(1.0, abs=1e-9)
    assert np.all(solution.pi_levels >= -1e-15)


def test_positive_drift_rejected():
    with pytest.raises(DriftNonNegative):
        ramaswami_pi(make_scalar(0.2, [0.2, 0.6]), 5)


def test_negative_horizon(scalar_model):
    with pytest.raises(ValueError):
        ramaswami_pi(scalar_model, -1)


def test_scalar_geometric_levels(scalar_model):
    solution = ramaswami_pi(scalar_model, 200)
    for k in range(1, 12):
        assert solution.pi(k)[0] == pytest.approx(10.0 / 27.0 * (1.0 / 3.0) ** (k - 1), abs=1e-12)
    assert solution.mass == pytest.approx(1.0, abs=1e-6)


def test_phased_matches_dense_solve():
    model = make_phased(2, 3, seed=2024, tail_family=None, drift_target=-0.3)
    solution = ramaswami_pi(model, 20)
    chain = build_finite(model, 400)
    dense = chain.split(solve_stationary(chain))
    for k in range(21):
        assert_allclose(solution.pi(k), dense[k], atol=1e-8)


@pytest.mark.parametrize("name", ["scalar-1", "pareto-1", "pareto-2", "weibull-1", "geometric-1", "pareto-cut12"])
def test_g_contracts(name):
    g_result = compute_G(preset(name))
    assert g_result.min_increment >= -1e-15
    assert g_result.residual < 1e-12
    assert g_result.row_sum_defect < 1e-10


def test_g_substochastic_with_positive_drift():
    model = make_scalar(0.2, [0.2, 0.6])
    with pytest.raises(DriftNonNegative):
        compute_G(model)
    g_result = compute_G(model, allow_nonnegative_drift=True)
    assert np.all(g_result.g_matrix <= 1.0 + 1e-12)
    assert g_result.g_matrix[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-10)
