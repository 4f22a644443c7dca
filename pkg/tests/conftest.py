import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance.py" in item.nodeid:
        _results[item.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_results):
        name = nodeid.split("::")[-1]
        verdict = "PASS" if _results[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict}")
