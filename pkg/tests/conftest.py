import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# -- acceptance summary -----------------------------------------------------
# tests marked acceptance(number, title) report one PASS/FAIL line each at
# the end of the run; details recorded through the ``measure`` fixture are
# appended to the line

import pytest

_RESULTS = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): an acceptance criterion")


@pytest.fixture
def measure(request):
    marker = request.node.get_closest_marker("acceptance")
    key = marker.args[0] if marker else request.node.name
    _DETAILS.setdefault(key, [])
    return lambda text: _DETAILS[key].append(text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (call.when == "call" and report.outcome != "passed")
    if call.when == "call" or failed:
        prev = _RESULTS.get(number, (title, True))[1]
        _RESULTS[number] = (title, prev and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok = _RESULTS[number]
        detail = "; ".join(_DETAILS.get(number, []))
        line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
