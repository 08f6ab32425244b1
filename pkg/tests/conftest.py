"""Collects the outcome of every acceptance criterion and prints one line per
criterion at the end of the run."""

_results: dict[str, list] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        if hasattr(report, "wasxfail"):
            outcome = "PASS" if report.outcome == "passed" else "FAIL (expected, see ledger)"
        else:
            outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _results[name] = [outcome, detail]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_results):
        outcome, detail = _results[name]
        terminalreporter.write_line(f"{outcome:<5} {name}  {detail}")
