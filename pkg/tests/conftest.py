import pytest

CRITERIA = {
    1: "summation consistency",
    2: "transcript-matrix replay",
    3: "kappa and delta-sharp identities",
    4: "covering lower bound",
    5: "consensus accuracy",
    6: "dp bound tightness",
    7: "linear-equation exactness and accuracy",
    8: "projection and adjacency properties",
    9: "optimisation convergence",
    10: "classification auc plateau",
    11: "determinism",
}

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for n in getattr(report, "criteria", ()):
        _results.setdefault(n, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.criteria = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        outcomes = _results.get(n)
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        elif any(o == "failed" for o in outcomes):
            status = "FAIL"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"criterion {n:>2} {status:<7} {CRITERIA[n]}")

