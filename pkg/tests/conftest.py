import shutil

import pytest
from hypothesis import settings

from tpespec.calibration_data import ENV_VAR, shipped_path

settings.register_profile("tpespec", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("tpespec")


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path_factory, monkeypatch):
    """Keep runs away from the shipped calibration file and the working directory."""
    cal = tmp_path_factory.mktemp("cal") / "calibration.cfg"
    shutil.copy(shipped_path(), cal)
    monkeypatch.setenv(ENV_VAR, str(cal))
    monkeypatch.setenv("TPESPEC_OUT", str(tmp_path_factory.mktemp("out")))
    yield cal


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.line(line)
