import time
from contextlib import contextmanager

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_RESULTS = []


class _Record:
    def __init__(self):
        self.notes = []

    def note(self, text):
        self.notes.append(text)


@pytest.fixture
def criterion():
    """Context manager timing one acceptance criterion and logging PASS/FAIL."""

    @contextmanager
    def run(number, title, budget):
        rec = _Record()
        start = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            ok = ok and elapsed < budget
            rec.note(f"{elapsed:.2f}s of {budget:g}s")
            line = f"[{number:2d}] {'PASS' if ok else 'FAIL'}  {title}  ({'; '.join(rec.notes)})"
            _RESULTS.append((number, line))
            print(line)
        assert elapsed < budget, f"runtime {elapsed:.1f}s exceeds {budget}s"

    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
