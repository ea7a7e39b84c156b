import numpy as np
import pytest

from scatsize.bank import build_bank, linear_grid


@pytest.fixture(scope="session")
def full_bank():
    """The 100x61 glass-bead bank: 1-100 um, 3-9 MHz in 0.1 MHz steps."""
    return build_bank(linear_grid(1, 100, 1), linear_grid(3, 9, 0.1))


@pytest.fixture(scope="session")
def coarse_bank():
    """41x61 bank, 16-96 um in 2 um steps."""
    return build_bank(linear_grid(16, 96, 2), linear_grid(3, 9, 0.1))


@pytest.fixture(scope="session")
def small_bank():
    # 7 sizes x 13 frequencies, still full row rank in double precision
    return build_bank(linear_grid(20, 80, 10), linear_grid(3, 9, 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report: one line per criterion at the end of the run ---------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}" + (f"  [{detail}]" if detail else ""))
