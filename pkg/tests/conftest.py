import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def gs_radial3():
    from inls.groundstate import solve_ground_state
    from inls.params import make_params
    from inls.spectral import Grid
    return solve_ground_state(make_params(3, "1/2", "2"), Grid.radial(3, 32, 1024))


@pytest.fixture(scope="session")
def gs_cart():
    from inls.groundstate import solve_ground_state
    from inls.params import make_params
    from inls.spectral import Grid
    return solve_ground_state(make_params(2, "1/2", "3"), Grid.cartesian(32, 256))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=str):
        terminalreporter.write_line(results[key])
