import numpy as np
import pytest

from pgvar import _backend
from pgvar.graph import Graph

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(_backend.KERNELS))
def backend(request, monkeypatch):
    """Run the test once per available shift kernel."""
    monkeypatch.setattr(_backend, "shift_axis1", _backend.KERNELS[request.param])
    return request.param


def random_dense(rng, n, density=0.5, symmetric=False, self_loops=True):
    m = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < density)
    if not self_loops:
        np.fill_diagonal(m, 0.0)
    if symmetric:
        m = np.triu(m) + np.triu(m, 1).T
    return m


def random_graph(rng, n, **kw):
    dense = random_dense(rng, n, **kw)
    return Graph.from_dense(dense), dense


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
