import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion.

    Returns ``report(key, ok, elapsed, limit, detail)`` which also folds the
    runtime bound into the verdict and returns it.
    """

    def report(key, ok, elapsed, limit, detail=""):
        verdict = bool(ok) and elapsed < limit
        line = f"{key}: {'PASS' if verdict else 'FAIL'} [{elapsed:.1f}s, limit {limit:.0f}s] {detail}"
        _ACCEPTANCE[key] = line
        print(line)
        return verdict

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_ACCEPTANCE[key])
