import pytest

_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.module.__name__.endswith("test_acceptance"):
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = getattr(item, "acceptance_detail", "")
        _acceptance.append((report.outcome, title, detail))


@pytest.fixture
def detail(request):
    """Let an acceptance test attach a one-line measurement to its summary line."""

    def set_detail(text):
        request.node.acceptance_detail = text

    return set_detail


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, title, detail in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{mark}] {title}"
        if detail:
            line += f"  -- {detail}"
        terminalreporter.write_line(line)
