import numpy as np
import pytest

from hybridloss.core import SparseFeatureVector

ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        ACCEPTANCE_RESULTS[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, status = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, L, c, n, nnz=2):
    """Chain instance with ``nnz`` random real features per position."""
    from hybridloss.chaincrf import ChainInstance
    feats = []
    for _ in range(L):
        ids = rng.choice(n, size=min(nnz, n), replace=False)
        feats.append(SparseFeatureVector.from_pairs(zip(ids.tolist(), rng.normal(size=ids.size))))
    return ChainInstance(tuple(feats), rng.integers(0, c, size=L))


def central_difference(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def assert_grad_close(analytic, numeric, rel=1e-4):
    scale = max(1.0, float(np.max(np.abs(numeric))))
    err = float(np.max(np.abs(analytic - numeric))) / scale
    assert err <= rel, f"relative gradient error {err:.3g} > {rel}"
