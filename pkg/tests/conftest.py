import time

import numpy as np
import pytest

from dartboost import Dataset, QueryGroups


def make_regression(n=200, n_features=4, seed=0, offset=0.0, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    y = offset + X[:, 0] + np.sin(2 * X[:, 1 % n_features]) + noise * rng.normal(size=n)
    return Dataset(X, y)


def make_classification(n=200, n_features=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    return Dataset(X, y)


def make_ranking(n_queries=20, docs=(3, 12), n_features=4, seed=0):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(docs[0], docs[1] + 1, size=n_queries)
    n = int(sizes.sum())
    X = rng.normal(size=(n, n_features))
    rel = np.clip(np.round(X[:, 0] + 0.5 * X[:, 1] + 1.5 + 0.5 * rng.normal(size=n)), 0, 4)
    return Dataset(X, rel, QueryGroups.from_sizes(sizes))


@pytest.fixture
def regression():
    return make_regression()


@pytest.fixture
def classification():
    return make_classification()


@pytest.fixture
def ranking():
    return make_ranking()


# -- acceptance reporting ------------------------------------------------

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _criteria.append((marker.args[0], marker.args[1], status, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    # parametrized criteria report once: FAIL beats PASS beats SKIP
    merged = {}
    for number, title, status, seconds in _criteria:
        _, old_status, old_seconds = merged.get(number, (title, "SKIP", 0.0))
        rank = {"SKIP": 0, "PASS": 1, "FAIL": 2}
        worst = status if rank[status] > rank[old_status] else old_status
        merged[number] = (title, worst, old_seconds + seconds)
    for number in sorted(merged):
        title, status, seconds = merged[number]
        terminalreporter.write_line(f"criterion {number:>2}  {status}  {title}  ({seconds:.2f}s)")


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start
