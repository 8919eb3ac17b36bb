import numpy as np
import pytest

from lindistadmm import assemble_lp, decompose, fixture_path, load_feeder

# Optimum of the bundled 4-bus feeder from the reference LP solver (HiGHS),
# cross-checked by kkt_check and by ADMM agreement in test_oracle.py.
FOUR_BUS_OPTIMUM = 0.7087409227019061


@pytest.fixture(scope="session")
def four_bus():
    return load_feeder(fixture_path("four_bus"))


@pytest.fixture(scope="session")
def four_bus_lp(four_bus):
    return assemble_lp(four_bus)


@pytest.fixture(scope="session")
def four_bus_dlp(four_bus, four_bus_lp):
    return decompose(four_bus_lp, four_bus, "component")


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def random_full_row_rank(rng, m, n):
    while True:
        A = rng.standard_normal((m, n))
        if np.linalg.matrix_rank(A) == m:
            return A


# ---------------------------------------------------------------- acceptance report

def pytest_configure(config):
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, text = marker.args
        entry = item.config._criteria.setdefault(number, {"text": text, "tests": []})
        entry["tests"].append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = config._criteria
    if not criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(criteria):
        entry = criteria[number]
        ok = all(outcome == "passed" for _, outcome in entry["tests"])
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {entry['text']} ({len(entry['tests'])} tests)"
        )
