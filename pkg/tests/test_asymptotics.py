import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.analysis.asymptotics import (
    convergence_sweep,
    d_i_bar,
    estimate_c_vectors,
    is_long_tailed_numeric,
    limit_constants,
    mean_increment,
    nls_distribution,
    subexponential_ratio,
    subgeometric_probe,
    tail_value,
)
from app.chains.generators import preset
from app.chains.tails import EmpiricalTail, GeometricTail, ParetoTail, WeibullTail
from app.errors import DegenerateLimit, Divergent, HorizonTooShort, InvalidTail, ReferenceMismatch
from app.solvers.mam import ramaswami_pi


@pytest.mark.parametrize("dist, k_probe, expected, long_tailed", [
    (ParetoTail(3.0, 1.0), [10, 100, 1000], (1001.0 / 1002.0) ** 3, True),
    (WeibullTail(1.0, 0.5), [100, 1000, 10000], np.exp(100.0 - np.sqrt(10001.0)), True),
    (GeometricTail(0.5), [10, 20, 40], 0.5, False),
])
def test_long_tail_probe(dist, k_probe, expected, long_tailed):
    table = is_long_tailed_numeric(dist, 1, k_probe)
    assert table.ratios[-1] == pytest.approx(expected, rel=1e-10)
    assert table.long_tailed is long_tailed


def test_tail_value():
    assert tail_value(ParetoTail(3.0, 1.0), 1) == pytest.approx(0.125)
    assert tail_value(GeometricTail(0.5), 3) == pytest.approx(0.0625)
    assert tail_value(WeibullTail(1.0, 0.5), 0) == 1.0


def test_long_tail_probe_needs_positive_tail():
    with pytest.raises(InvalidTail):
        is_long_tailed_numeric(EmpiricalTail((0.5, 0.5)), 1, [1, 2])


def test_subexponential_ratio():
    _, pareto = subexponential_ratio(ParetoTail(3.0, 1.0), 2000)
    assert pareto[-1] == pytest.approx(2.0, abs=0.05)
    _, geometric = subexponential_ratio(GeometricTail(0.5), 100)
    assert geometric[-1] > 10.0
    with pytest.raises(ValueError):
        subexponential_ratio(ParetoTail(3.0), 200_000)


def test_subgeometric_probe():
    ks, pareto = subgeometric_probe(ParetoTail(3.0), [10, 1000, 100000])
    assert abs(pareto[-1]) < 1e-3
    _, geometric = subgeometric_probe(GeometricTail(0.5), [1000])
    assert geometric[0] == pytest.approx(np.log(0.5) * 1001 / 1000)


def test_pareto_c_vector(pareto_model):
    estimate = estimate_c_vectors(pareto_model, ParetoTail(2.0, 1.0), [256, 512, 1024])
    assert estimate.shortcut
    assert_allclose(estimate.c_a, [0.15], rtol=1e-12)
    assert_allclose(estimate.c_b, [0.0])
    assert estimate.ratios_a[-1, 0] == pytest.approx(0.15, rel=1e-2)


def test_mismatched_reference_diverges(pareto_model):
    with pytest.raises(Divergent):
        estimate_c_vectors(pareto_model, ParetoTail(3.0, 1.0), [256, 512, 1024])


def test_nls_distribution_scalar(scalar_model):
    solution = ramaswami_pi(scalar_model, 40)
    assert mean_increment(scalar_model, solution.pi0, solution.pi_bar0) == pytest.approx(1.0 / 3.0, abs=1e-12)
    nls = nls_distribution(scalar_model, solution, 5)
    assert nls.d_i[0] == pytest.approx(1.0, abs=1e-12)
    assert nls.d[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert nls.d[1] == pytest.approx(1.0, abs=1e-12)
    assert_allclose(nls.d_i_bar, 0.0, atol=1e-12)


def test_nls_distribution_pareto(pareto_model):
    solution = ramaswami_pi(pareto_model, 0)
    value = d_i_bar(pareto_model, solution.pi0, solution.pi_bar0, 0)
    expected = solution.pi_bar0[0] * pareto_model.double_tail_a(0)[0, 0]
    assert value == pytest.approx(expected / mean_increment(pareto_model, solution.pi0, solution.pi_bar0))


def test_nls_distribution_requires_mass(scalar_model):
    with pytest.raises(HorizonTooShort):
        nls_distribution(scalar_model, ramaswami_pi(scalar_model, 2), 5)


def test_limit_constants_identity(pareto_model):
    solution = ramaswami_pi(pareto_model, 0)
    constants = limit_constants(pareto_model, ParetoTail(2.0, 1.0), solution)
    sigma = pareto_model.sigma
    assert constants.theta == pytest.approx(solution.pi_bar0[0] * 0.15 / (-sigma), rel=1e-12)
    assert constants.theta == pytest.approx(constants.d_i_ratio * constants.theta_di, rel=1e-12)


def test_limit_constants_degenerate(scalar_model):
    with pytest.raises(DegenerateLimit):
        limit_constants(scalar_model, ParetoTail(2.0, 1.0), ramaswami_pi(scalar_model, 10))


def test_sweep_scalar_has_zero_ratios(scalar_model, settings):
    report = convergence_sweep(scalar_model, ParetoTail(2.0, 1.0), [2, 4], 3, 64, settings=settings)
    assert len(report.rows) == 8
    assert [(r.n, r.k) for r in report.rows][:4] == [(2, 0), (2, 1), (2, 2), (2, 3)]
    assert all(r.ratio_F == 0.0 and r.ratio_DI == 0.0 and r.ratio_pitail == 0.0 for r in report.rows)
    assert "degenerate limit" in report.flags
    assert report.row(4, 0).target_pik == pytest.approx(4.0 / 9.0, abs=1e-12)


def test_sweep_reference_mismatch(pareto_model, settings):
    with pytest.raises(ReferenceMismatch):
        convergence_sweep(pareto_model, ParetoTail(3.0, 1.0), [8, 16], 2, 256, settings=settings)


def test_sweep_rejects_small_reference(pareto_model, settings):
    with pytest.raises(ValueError):
        convergence_sweep(pareto_model, ParetoTail(2.0, 1.0), [8, 16], 2, 100, settings=settings)


@pytest.mark.slow
def test_pareto_sweep_approaches_theta(pareto_model, settings):
    report = convergence_sweep(pareto_model, ParetoTail(2.0, 1.0), [64, 256], 5, 4096, settings=settings)
    assert report.flags == ()
    for k in range(6):
        coarse, fine = report.row(64, k), report.row(256, k)
        gap_coarse = abs(coarse.ratio_F - coarse.target_theta_pik)
        gap_fine = abs(fine.ratio_F - fine.target_theta_pik)
        assert gap_fine <= 0.25 * abs(fine.target_theta_pik)
        assert gap_fine <= gap_coarse
        if k <= 2:
            assert fine.ratio_pitail > 0.0
            assert fine.ratio_pitail == pytest.approx(fine.target_pik, rel=0.3)
    spread = [report.row(256, k).rel_tv_ratio for k in range(6)]
    assert max(spread) - min(spread) <= 0.1 * max(spread)


def test_d_i_bar_tracks_reference_tail(pareto_model):
    solution = ramaswami_pi(pareto_model, 0)
    reference = ParetoTail(2.0, 1.0)
    first = d_i_bar(pareto_model, solution.pi0, solution.pi_bar0, 1000) / reference.tail(1000)
    second = d_i_bar(pareto_model, solution.pi0, solution.pi_bar0, 2000) / reference.tail(2000)
    assert second == pytest.approx(first, rel=0.05)


def test_pareto_convolution_ratio():
    ks, ratios = subexponential_ratio(ParetoTail(3.0, 1.0), 1000)
    assert ks[-1] == 1000
    assert 1.9 <= ratios[-1] <= 2.1


@pytest.mark.slow
def test_pareto2_sweep_trend(pareto2_model, settings):
    report = convergence_sweep(pareto2_model, ParetoTail(1.0, 1.0), [64, 256], 5, 4096, settings=settings)
    for k in range(6):
        coarse, fine = report.row(64, k), report.row(256, k)
        assert abs(fine.ratio_F - fine.target_theta_pik) < abs(coarse.ratio_F - coarse.target_theta_pik)


@pytest.mark.slow
def test_parallel_sweep_is_deterministic(pareto_model, settings):
    first = convergence_sweep(pareto_model, ParetoTail(2.0, 1.0), [16, 32], 2, 512, settings=settings)
    second = convergence_sweep(pareto_model, ParetoTail(2.0, 1.0), [16, 32], 2, 512,
                               settings=settings.with_overrides(workers=1))
    assert [r.err_signed for r in first.rows] == [r.err_signed for r in second.rows]


@pytest.mark.parametrize("grid", [[8, 16], [32, 64]])
def test_sweep_flags_geometric_model(settings, grid):
    model = preset("geometric-1")
    estimate = estimate_c_vectors(model, ParetoTail(2.0, 1.0), grid)
    assert estimate.mismatch
    assert not estimate.shortcut
    assert_allclose(estimate.c_a, [0.0])
    report = convergence_sweep(model, ParetoTail(2.0, 1.0), grid, 2, 16 * grid[-1], settings=settings)
    assert "reference mismatch" in report.flags
    assert report.constants.theta == 0.0
    assert all(r.target_theta_pik == 0.0 for r in report.rows)


def test_limit_constants_reports_mismatch():
    model = preset("geometric-1")
    with pytest.raises(DegenerateLimit) as info:
        limit_constants(model, ParetoTail(2.0, 1.0), ramaswami_pi(model, 4), [8, 16])
    assert info.value.mismatch


@pytest.mark.slow
def test_pareto_signed_error_turns_positive(pareto_model, settings):
    report = convergence_sweep(pareto_model, ParetoTail(2.0, 1.0), [128, 256], 5, 4096, settings=settings)
    for n in (128, 256):
        for k in range(6):
            assert report.row(n, k).err_signed > 0.0
