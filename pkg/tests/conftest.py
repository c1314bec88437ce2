import warnings
from pathlib import Path

import hypothesis
import pytest

warnings.filterwarnings("ignore", message=".*httpx2.*")

hypothesis.settings.register_profile("default", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_acceptance: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")
    config.addinivalue_line("filterwarnings", "ignore::DeprecationWarning:fastapi.testclient")
    config.addinivalue_line("filterwarnings", "ignore:.*httpx2.*")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        num, title = m.args
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        if _acceptance.get(num, (title, "PASS"))[1] == "FAIL":
            status = "FAIL"
        _acceptance[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        title, status = _acceptance[num]
        terminalreporter.write_line(f"AC{num:02d} {status}  {title}")


@pytest.fixture
def configs_dir():
    return CONFIGS
