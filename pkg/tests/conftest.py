import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, n, m, radius=3.0):
    """Uniform points in the ball of ``radius`` in C^m."""
    x = rng.standard_normal((n, 2 * m))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= radius * rng.random((n, 1)) ** (1.0 / (2 * m))
    return x[:, 0::2] + 1j * x[:, 1::2]


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
