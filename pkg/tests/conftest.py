import numpy as np
import pytest

_ACCEPTANCE = []


class Recorder:
    """Collects one verdict line per acceptance criterion."""

    def __call__(self, number: int, ok: bool, detail: str):
        verdict = "PASS" if ok else "FAIL"
        line = f"[{verdict}] criterion {number:>2}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    def skip(self, number: int, reason: str):
        line = f"[SKIP] criterion {number:>2}: {reason}"
        _ACCEPTANCE.append(line)
        print(line)
        pytest.skip(reason)


@pytest.fixture
def report():
    return Recorder()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
