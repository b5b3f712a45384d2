"""共用夹具"""
import pytest

from app.chains.generators import pareto_1, pareto_2, pareto_cut12, scalar_1
from app.settings import Settings


@pytest.fixture
def scalar_model():
    return scalar_1()


@pytest.fixture
def pareto_model():
    return pareto_1()


@pytest.fixture
def pareto2_model():
    return pareto_2()


@pytest.fixture(scope="session")
def cut_model():
    return pareto_cut12()


@pytest.fixture
def settings():
    return Settings(workers=2)
