import random

import pytest

from braid import BraidWord


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run statistical and acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical or acceptance-scale test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_word(rng: random.Random, strands: int, length: int) -> BraidWord:
    letters = [rng.choice([-1, 1]) * rng.randint(1, strands - 1) for _ in range(length)]
    return BraidWord(strands, tuple(letters))


@pytest.fixture
def rng():
    return random.Random(20240501)
