import re

import pytest

from agentprint import features, reduce as reduction, synth

_CRITERION_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_criterion_outcomes = {}


def pytest_runtest_logreport(report):
    match = _CRITERION_RE.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call" or (report.when == "setup" and report.skipped):
        outcome = ("PASS" if report.passed
                   else "SKIP" if report.skipped else "FAIL")
        _criterion_outcomes[number] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_outcomes):
        terminalreporter.write_line(
            f"[acceptance] criterion {number}: {_criterion_outcomes[number]}")


@pytest.fixture(scope="session")
def fixture_corpus():
    """Full-size synthetic corpus: 5 agents x 500 PRs with injected signatures."""
    return synth.generate_corpus(n_per_agent=500, seed=7)


@pytest.fixture(scope="session")
def fixture_matrix(fixture_corpus):
    return features.build_matrix(fixture_corpus)


@pytest.fixture(scope="session")
def fixture_reduced(fixture_matrix):
    report = reduction.reduce_features(fixture_matrix)
    return fixture_matrix.restrict(report.kept), report


@pytest.fixture(scope="session")
def small_corpus():
    return synth.generate_corpus(n_per_agent=40, seed=11)
