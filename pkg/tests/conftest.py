"""Prints a one-line verdict per acceptance criterion at the end of the run."""
import pytest

_verdicts: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        verdict = "PASS" if report.passed else "FAIL"
        _verdicts[f"{number:>2}"] = (verdict, f"{title} ({report.duration:.2f} s)")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts, key=int):
        verdict, text = _verdicts[number]
        terminalreporter.write_line(f"[{verdict}] criterion {number.strip()}: {text}")
