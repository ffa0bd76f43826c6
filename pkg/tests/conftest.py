import numpy as np
import pytest

# p0 bath occupation at 0.6 K, 30-digit Bose factor (mpmath, exact SI constants)
N0_P0 = 1249.69721405580746
GAMMA_M = 1e-5


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance criteria: one PASS/FAIL line each in the terminal summary

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): numbered acceptance criterion")
    config.stash[_CRITERIA] = {}


_CRITERIA = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    ok = rep.passed and not hasattr(rep, "wasxfail")
    item.config.stash[_CRITERIA][mark.args[0]] = (ok, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
