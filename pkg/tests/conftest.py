import time

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion: outcome, runtime and a detail line.

    Usage: ``with criterion(3, limit=120) as rec: ...; rec.detail = "..."``.
    """

    class Recorder:
        def __init__(self, number: int, limit: float):
            self.number = number
            self.limit = limit
            self.detail = ""

        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            elapsed = time.perf_counter() - self.start
            ok = exc_type is None and elapsed < self.limit
            status = "PASS" if ok else "FAIL"
            note = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}"
            line = f"criterion {self.number:2d}: {status}  ({elapsed:.1f}s, limit {self.limit:g}s)  {note}"
            _RESULTS[self.number] = (status, line)
            print(line)
            if exc_type is None:
                assert elapsed < self.limit, f"runtime {elapsed:.1f}s exceeds {self.limit}s"
            return False

    return lambda number, limit: Recorder(number, limit)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number][1])
