import pytest

from scanforest.scan_model import ScanDataset, ScanRecord
from scanforest.synthgen import GeneratorConfig


@pytest.fixture
def tiny_ds():
    return ScanDataset(
        (
            ScanRecord("192.0.2.5", (80, 21), ("HTTP", "FTP")),
            ScanRecord("192.0.2.6", (22,), ("SSH",)),
            ScanRecord("192.0.2.5", (80, 80, 22), ("HTTP", "HTTP", "SSH")),
        )
    )


@pytest.fixture
def small_cfg():
    return GeneratorConfig(n_ips=60, scans_per_ip=8, anomaly_rate=0.05, seed=3)


_CRITERIA: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on ``ok`` itself."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA, key=lambda t: t[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
