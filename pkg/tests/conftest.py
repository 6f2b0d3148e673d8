import numpy as np
import pytest

from builders import disk_labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_touching_disks():
    # centers 20 px apart with radius 10: the disks meet between x = 29 and x = 31
    return disk_labels((48, 64), [(24, 20, 10), (24, 40, 10)])


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line (also printed) and fail the test if it did not pass."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        request.config.stash[ACCEPTANCE].append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
