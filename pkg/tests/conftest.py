import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def criterion(request):
    """``record(number, ok, detail, soft=False)`` prints one verdict line and
    fails the test unless ``ok`` (a soft criterion only warns)."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, ok, detail, soft=False):
        verdict = "PASS" if ok else ("WARN" if soft else "FAIL")
        line = f"[{verdict}] criterion {number}: {detail}"
        print(line)
        lines.append(line)
        if not ok and not soft:
            pytest.fail(line, pytrace=False)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES_KEY]
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
