import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record the enclosing test as an acceptance criterion (PASS iff it passes)."""
    name = request.node.get_closest_marker("criterion").args[0]
    info = {"detail": ""}
    ACCEPTANCE[name] = ("FAIL", "did not finish")
    yield info
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    ACCEPTANCE[name] = ("PASS" if ok else "FAIL", info["detail"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
