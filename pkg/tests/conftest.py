import time
from contextlib import contextmanager

import pytest

_RESULTS: list[str] = []


@contextmanager
def _criterion(name: str, limit_s: float):
    """Time a block, record one PASS/FAIL line, and fail on an exceeded limit."""
    start = time.perf_counter()
    try:
        yield
    except BaseException as e:
        _RESULTS.append(f"FAIL  {name}  ({time.perf_counter() - start:.1f} s)  {type(e).__name__}: {e}".splitlines()[0])
        raise
    elapsed = time.perf_counter() - start
    ok = elapsed < limit_s
    _RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}  ({elapsed:.1f} s, limit {limit_s:.0f} s)")
    assert ok, f"{name} took {elapsed:.1f} s, limit {limit_s} s"


@pytest.fixture
def criterion():
    return _criterion


@pytest.fixture
def acceptance_note():
    def note(text: str) -> None:
        _RESULTS.append(f"      {text}")

    return note


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
