import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Per-criterion gate outcomes, printed once at the end of the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        gates = _ACCEPTANCE[number]
        ok = all(passed for passed, _ in gates.values())
        detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, (passed, info) in gates.items())
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} -- {detail}")
