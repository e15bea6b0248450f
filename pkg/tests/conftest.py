import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """``record(number, ok, detail)`` collects one summary line per acceptance criterion."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def record(number: int, ok: bool, detail: str) -> bool:
        results[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
