import numpy as np
import pytest

from onebit_dmimo.waveform import OfdmConfig

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ofdm():
    return OfdmConfig()


@pytest.fixture
def ofdm_scaled():
    """Grid at one tenth of the physical rates (same sample counts)."""
    return OfdmConfig().scaled(10)


@pytest.fixture(scope="session")
def verdict(request):
    """``verdict(criterion, ok, detail)`` prints one PASS/FAIL line, repeats it in
    the terminal summary and fails the calling test when ``ok`` is false."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
