import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "nslog", deadline=None, max_examples=15, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture]
)
settings.load_profile("nslog")


@pytest.fixture(autouse=True, scope="session")
def _cache_dir(tmp_path_factory):
    os.environ["NSLOG_CACHE_DIR"] = str(tmp_path_factory.mktemp("cache"))
    yield


@pytest.fixture(scope="session")
def g16():
    from nslog.spectral import make_grid

    return make_grid(2, 16)


@pytest.fixture(scope="session")
def g32():
    from nslog.spectral import make_grid

    return make_grid(2, 32)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
