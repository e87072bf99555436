import numpy as np
import pytest

from topsimp.grid import ScalarField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, shape, ties=False):
    if ties:
        return ScalarField.from_array(rng.integers(0, 4, size=shape).astype(float))
    return ScalarField.from_array(rng.random(shape))


_acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None:
        return
    n = crit.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _acceptance[n] = (rep.passed, crit.args[1], detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance):
        ok, title, detail = _acceptance[n]
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
