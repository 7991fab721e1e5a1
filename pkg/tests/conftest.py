import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def ieee9():
    from gproa.cli import bundled
    from gproa.microgrid import load_model
    return load_model(bundled("ieee9_microgrid.json"))


@pytest.fixture(scope="session")
def ieee9_system(ieee9):
    from gproa.microgrid import microgrid_build
    return microgrid_build(ieee9)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config._acceptance_lines

    def report(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
