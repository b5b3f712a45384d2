import numpy as np
import pytest
from numpy.testing import assert_array_equal

from app.chains.generators import (
    DRIFT_TOL,
    PRESETS,
    make_phased,
    make_scalar,
    preset,
    scalar_tail,
)
from app.chains.model import row_sum_defect, validate
from app.chains.tails import GeometricTail, ParetoTail, WeibullTail
from app.errors import CannotReachDrift, InvalidModel, MassMismatch


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    model = preset(name)
    assert validate(model).ok
    assert model.sigma < 0


def test_preset_lookup_is_case_insensitive():
    assert preset("Scalar-1").name == "scalar-1"
    with pytest.raises(KeyError):
        preset("nope")


def test_cut_preset_has_finite_support(cut_model):
    assert cut_model.is_finite_support
    assert cut_model.k_a == 12
    assert cut_model.name == "pareto-cut12"


def test_make_scalar_mass_check():
    with pytest.raises(MassMismatch):
        make_scalar(0.5, [0.2, 0.2])
    with pytest.raises(MassMismatch):
        make_scalar(0.6, [0.2, 0.2], boundary=(0.5, 0.4))


def test_scalar_tail_mass():
    model = make_scalar(0.5, [0.2], scalar_tail(GeometricTail(0.5), 0.6))
    assert row_sum_defect(model) < 1e-14


@pytest.mark.parametrize("tail", [None, ParetoTail(3.0), WeibullTail(1.0, 0.5), GeometricTail(0.4)])
def test_phased_hits_drift(tail):
    model = make_phased(3, 2, seed=5, tail_family=tail, drift_target=-0.25)
    assert model.sigma == pytest.approx(-0.25, abs=DRIFT_TOL)
    assert row_sum_defect(model) < 1e-10
    assert model.has_parametric_tail == (tail is not None)


def test_phased_is_reproducible():
    first = make_phased(2, 4, seed=42, tail_family=ParetoTail(2.5), drift_target=-0.3)
    second = make_phased(2, 4, seed=42, tail_family=ParetoTail(2.5), drift_target=-0.3)
    for a, b in zip(first.a_blocks, second.a_blocks):
        assert_array_equal(a, b)
    assert_array_equal(first.b_blocks[0], second.b_blocks[0])
    third = make_phased(2, 4, seed=43, tail_family=ParetoTail(2.5), drift_target=-0.3)
    assert not np.array_equal(first.a_blocks[1], third.a_blocks[1])


def test_rank_one_down_block():
    model = make_phased(1, 3, seed=1, tail_family=None, drift_target=-0.2)
    assert np.linalg.matrix_rank(model.a_blocks[0]) == 1
    full = make_phased(1, 3, seed=1, tail_family=None, drift_target=-0.2, rank_one=False)
    assert np.linalg.matrix_rank(full.a_blocks[0]) == 3


def test_phased_rejects_unreachable_drift():
    with pytest.raises(CannotReachDrift):
        make_phased(1, 2, seed=0, tail_family=None, drift_target=0.1)
    with pytest.raises(CannotReachDrift):
        make_phased(1, 2, seed=0, tail_family=None, drift_target=-1.5)


def test_phased_rejects_phase_count():
    with pytest.raises(InvalidModel):
        make_phased(0, 2, seed=0, tail_family=None, drift_target=-0.2)
