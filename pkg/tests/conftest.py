import time

import pytest

_ACCEPTANCE: list[str] = []


class Criterion:
    def __init__(self, number: int, title: str, limit: float | None):
        self.number, self.title, self.limit = number, title, limit
        self.start = time.perf_counter()

    def check(self, ok: bool, detail: str) -> None:
        elapsed = time.perf_counter() - self.start
        in_time = self.limit is None or elapsed < self.limit
        passed = bool(ok) and in_time
        budget = f" (limit {self.limit:g}s)" if self.limit is not None else ""
        line = f"{'PASS' if passed else 'FAIL'} [{self.number}] {self.title}: {detail}; {elapsed:.1f}s{budget}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, detail
        assert in_time, f"took {elapsed:.1f}s, limit {self.limit}s"


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("[", 1)[1].split("]", 1)[0])):
            terminalreporter.write_line(line)
