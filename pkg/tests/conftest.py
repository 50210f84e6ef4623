import numpy as np
import pytest

from partmesh.sparse import SparseMatrix


def central_diff(f, x, h=1e-6):
    """Central finite differences of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x.flat[i]
        x.flat[i] = old + h
        fp = f(x)
        x.flat[i] = old - h
        fm = f(x)
        x.flat[i] = old
        g.flat[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    """Norm-wise relative error, ``|a - b| / max(|a|, |b|)``."""
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def random_graph_bundle(n, rng, p=0.3):
    """Laplacian bundle of a random connected graph (a path plus random chords)."""
    from partmesh.mesh import laplacian_from_adjacency

    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1
    extra = np.triu(rng.random((n, n)) < p, 2)
    a[extra] = 1
    a = np.maximum(a, a.T)
    return laplacian_from_adjacency(SparseMatrix.from_dense(a))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    """Remember one acceptance verdict; printed in the terminal summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
