import pytest

from dppmle import TrackerConfig, build_warmstart


@pytest.fixture(scope="session")
def cfg():
    return TrackerConfig()


@pytest.fixture(scope="session")
def warm3():
    return build_warmstart(3, seed=42)


@pytest.fixture(scope="session")
def warm4():
    return build_warmstart(4, seed=42)


@pytest.fixture(scope="session")
def warm5():
    return build_warmstart(5, seed=42)


@pytest.fixture(scope="session")
def warm6():
    return build_warmstart(6, seed=42)
