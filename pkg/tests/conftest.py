import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_meb_radius(X):
    """Independent MEB oracle: the smallest enclosing circumball over all
    support subsets of size <= d + 1."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    best = np.inf
    for size in range(1, min(n, d + 1) + 1):
        for T in itertools.combinations(range(n), size):
            A = X[list(T)]
            if size == 1:
                c = A[0]
            else:
                # c = A0 + V^T a with |c - Ai|^2 equal for all i
                V = A[1:] - A[0]
                G = V @ V.T
                if abs(np.linalg.det(G)) < 1e-12:
                    continue
                a = np.linalg.solve(G, 0.5 * np.einsum("ij,ij->i", V, V))
                c = A[0] + a @ V
            r = np.linalg.norm(A[0] - c)
            if np.all(np.linalg.norm(X - c, axis=1) <= r + 1e-9):
                best = min(best, r)
    return best


def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def equilateral_triangle():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {line}")
