import contextlib
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = {}


class _Record:
    detail = ""


@pytest.fixture
def criterion():
    """Context manager that records and prints one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def run(number, title):
        rec = _Record()
        t0 = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            line = (f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
                    f"  [{time.perf_counter() - t0:.1f}s] {rec.detail}")
            _CRITERIA[number] = line
            print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
