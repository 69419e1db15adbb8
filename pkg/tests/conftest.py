import pytest

from ttcc import engine

# every micro-step in the suite asserts that the store only grows
engine.CHECK_MONOTONE = True


@pytest.fixture
def data_dir():
    from importlib import resources

    return resources.files("ttcc") / "data"
