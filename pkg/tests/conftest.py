import pytest

_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """criterion number -> list of (part, ok, detail); printed after the run."""
    return request.config.stash.setdefault(_KEY, {})


def pytest_terminal_summary(terminalreporter, config):
    report = config.stash.get(_KEY, None)
    if not report:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(report):
        parts = report[number]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name} {'ok' if good else 'FAILED'} ({info})"
                           for name, good, info in parts)
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}: {detail}")
