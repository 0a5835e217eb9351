import numpy as np
import pytest

from pdconsensus.graph import Graph
from pdconsensus.problem import generate_lasso


class CountingMatrix:
    """Wraps a dense matrix and counts every product taken with it."""

    # make ndarray @ CountingMatrix defer to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)
        self.products = 0

    @property
    def shape(self):
        return self.a.shape

    @property
    def T(self):
        outer = self

        class _T:
            shape = outer.a.shape[::-1]

            def __matmul__(self, v):
                outer.products += 1
                return outer.a.T @ v

        return _T()

    def __matmul__(self, v):
        self.products += 1
        return self.a @ v

    def __rmatmul__(self, v):
        self.products += 1
        return v @ self.a


@pytest.fixture
def small_lasso():
    return generate_lasso(N=6, n=12, m=8, seed=3)


@pytest.fixture
def ring6():
    return Graph(6, tuple((i, (i + 1) % 6) for i in range(6)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
