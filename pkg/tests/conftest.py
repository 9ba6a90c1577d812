import numpy as np
import pytest

from pnml_ood import build_stats, decompose


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def stats_of(X, **kw):
    X = np.asarray(X, dtype=float)
    return build_stats(decompose(X, **kw), X.shape[0])


def random_simplex(rng, c):
    p = rng.dirichlet(np.ones(c))
    return p / p.sum()


def random_instance(rng, n_range=(20, 200), m_range=(2, 20), c_range=(2, 10), scale=0.3):
    """Training rows, smoothed one-hot targets and a test point in the row space."""
    from pnml_ood.erm import labels_to_one_hot, one_hot_targets

    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    c = int(rng.integers(c_range[0], c_range[1] + 1))
    X = rng.standard_normal((n, m)) * scale
    labels = rng.integers(0, c, size=n)
    labels[:c] = np.arange(c)
    Z = one_hot_targets(labels_to_one_hot(labels, c), eps=0.1 / c)
    x = rng.standard_normal(m) * scale
    return X, Z, x


# -- acceptance criterion summary ----------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, [title, "PASS"])
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry[1] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}")
