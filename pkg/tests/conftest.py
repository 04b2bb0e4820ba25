import numpy as np
import pytest

from shortcut_shield.simulator import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(counts, d=3, seed=0):
    """Dataset with exactly the given ``counts[y][v]`` rows per cell."""
    r = np.random.default_rng(seed)
    ys, vs = [], []
    for yy in (0, 1):
        for vv in (0, 1):
            ys += [yy] * counts[yy][vv]
            vs += [vv] * counts[yy][vv]
    y, v = np.array(ys), np.array(vs)
    x = r.standard_normal((len(y), d)) + (2 * y[:, None] - 1)
    return Dataset(x, y, v)


@pytest.fixture
def cell_dataset():
    return make_dataset


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(criterion, passed, detail)``; echoed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def log(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
