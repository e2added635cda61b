import math
from importlib import resources

import numpy as np
import pytest

from metric_audit.core import Dataset, read_dataset

DATA = resources.files("metric_audit").joinpath("data")

# criterion number -> (passed, description), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def data_path(name):
    return str(DATA.joinpath(name))


@pytest.fixture
def points20():
    return read_dataset(data_path("points20.csv"))


@pytest.fixture
def cosine_fixture():
    return read_dataset(data_path("cosine4.csv"))


@pytest.fixture
def line4():
    return read_dataset(data_path("line4.csv"))


def unit(deg):
    return (math.cos(math.radians(deg)), math.sin(math.radians(deg)))


@pytest.fixture
def angles_0_60_120():
    return Dataset.from_arrays([unit(0), unit(60), unit(120)])


def random_dataset(n, d, seed):
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(rng.normal(size=(n, d)), labels=rng.integers(1, 4, size=n))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {desc}")
