import pytest

from coarse_clt.services import fixtures


@pytest.fixture
def golden_mean():
    return fixtures.golden_mean()


@pytest.fixture
def free_rank_two():
    return fixtures.free_rank_two()


@pytest.fixture
def two_cycle():
    return fixtures.two_cycle()


@pytest.fixture
def jordan():
    return fixtures.jordan_block()


@pytest.fixture
def period_two():
    return fixtures.period_two_branching()


@pytest.fixture
def doubled_free():
    return fixtures.doubled_free_rank_two()


@pytest.fixture
def self_loop():
    return fixtures.self_loop()
