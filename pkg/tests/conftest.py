import numpy as np
import pytest

from qme.presets import SIGMA_1, SIGMA_2, SIGMA_3

PAULIS = (np.eye(2, dtype=complex), SIGMA_1, SIGMA_2, SIGMA_3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_superoperator(spec, t):
    """Independent oracle: apply the generator to every matrix unit."""
    from qme.generators import apply_generator

    d = spec.d
    S = np.empty((d * d, d * d), dtype=complex)
    for k in range(d * d):
        E = np.zeros(d * d, dtype=complex)
        E[k] = 1.0
        S[:, k] = apply_generator(spec, t, E.reshape(d, d)).reshape(-1)
    return S


def random_matrix(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


# --- acceptance criteria report ---------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.fixture
def detail(request):
    """Attach a short measured summary to the criterion line of the running test."""
    def record(text):
        request.node.criterion_detail = text

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    number, title = marker.args
    ok = rep.passed and rep.when == "call"
    _, prev_ok, _ = _CRITERIA.get(number, (title, True, ""))
    _CRITERIA[number] = (title, prev_ok and ok, getattr(item, "criterion_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, info = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({info})" if info else ""))
