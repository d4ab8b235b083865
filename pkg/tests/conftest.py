import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

_CRITERIA = {}


def _line(n, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's verdict and fail the test if it did not hold."""
    n = request.node.get_closest_marker("criterion").args[0]

    def record(ok, detail):
        _CRITERIA[n] = _line(n, ok, detail)
        print(_CRITERIA[n])
        assert ok, _CRITERIA[n]

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call" and rep.failed and mark.args[0] not in _CRITERIA:
        # crashed before recording a verdict
        _CRITERIA[mark.args[0]] = _line(mark.args[0], False, f"error: {call.excinfo.typename}: {call.excinfo.value}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
