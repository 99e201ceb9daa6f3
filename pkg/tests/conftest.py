import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def brute_norm_counts(d: int, max_n: int) -> np.ndarray:
    """#{y in Z^d : |y|^2 = n} for n <= max_n by scanning the whole box."""
    s = int(np.sqrt(max_n)) + 1
    axis = np.arange(-s, s + 1) ** 2
    total = np.zeros(1, dtype=np.int64)
    for _ in range(d):
        total = (total[:, None] + axis[None, :]).ravel()
        total = total[total <= max_n]
    return np.bincount(total, minlength=max_n + 1)[: max_n + 1]


def brute_sphere(d: int, n: int) -> list[tuple[int, ...]]:
    s = int(np.sqrt(n)) + 1
    return [y for y in itertools.product(range(-s, s + 1), repeat=d) if sum(c * c for c in y) == n]


@pytest.fixture
def brute():
    return brute_norm_counts


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
