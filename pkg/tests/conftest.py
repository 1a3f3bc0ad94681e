import os

import pytest

from dwell4.eigensolver import PotentialSpec, solve_integrals
from dwell4.regime_map import MARKED_POINTS


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    # keep CLI runs away from the user's cache file
    path = tmp_path_factory.mktemp("cache") / "coefficients.json"
    old = os.environ.get("DWELL4_CACHE")
    os.environ["DWELL4_CACHE"] = str(path)
    yield path
    if old is None:
        os.environ.pop("DWELL4_CACHE", None)
    else:
        os.environ["DWELL4_CACHE"] = old


@pytest.fixture(scope="session")
def integrals():
    cache = {}

    def get(v0):
        if v0 not in cache:
            cache[v0] = solve_integrals(PotentialSpec(v0))
        return cache[v0]

    return get


@pytest.fixture(scope="session")
def point(integrals):
    """ModelParams at the marked points A, B, C."""

    def get(name):
        v0, gamma = MARKED_POINTS[name]
        return integrals(v0).at(gamma)

    return get


# acceptance report: one line per check, printed after the run
_REPORT = []


def report(criterion, label, ok, detail=""):
    _REPORT.append((criterion, label, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance")
    for criterion, label, ok, detail in sorted(_REPORT, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status} criterion {criterion}: {label}" + (f" ({detail})" if detail else ""))
