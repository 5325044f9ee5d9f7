import pytest

from ecgsynth.dataset import normalize_set, resample_set
from ecgsynth.synthetic import synth_beats


def prepared(label, n, seed, length=256):
    """Synthetic beats resampled to ``length`` and scaled to [-1, 1] per beat."""
    return normalize_set(resample_set(synth_beats(label, n, seed), length), "per-beat")


@pytest.fixture(scope="session")
def normal_beats():
    return prepared("N", 100, 3)


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Shared list of ``(criterion, passed, detail)`` rows for the summary."""
    if not hasattr(request.config, "_acceptance"):
        request.config._acceptance = []
    return request.config._acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = getattr(config, "_acceptance", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
