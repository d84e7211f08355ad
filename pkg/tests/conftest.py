import numpy as np
import pytest

from gransformer import tensor as T


@pytest.fixture
def f64():
    with T.default_dtype(np.float64):
        yield


def fd_grad(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central differences of a scalar numpy function."""
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2 * h)
    return g


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance_line(request):
    """Record one ``CRITERION n PASS|FAIL detail`` line for the terminal summary."""

    def record(number, passed: bool, detail: str):
        line = f"CRITERION {number} {'PASS' if passed else 'FAIL'} {detail}"
        request.config.stash[_LINES].append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
