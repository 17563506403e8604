import pytest
from hypothesis import HealthCheck, settings

# numerical properties are slow per example; keep runs bounded and deterministic
settings.register_profile("openasep", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("openasep")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs for more than a few seconds")
    config.addinivalue_line("markers", "acceptance(number, title): one of the numbered acceptance criteria")
    config._acceptance = {}
    config._acceptance_notes = {}


@pytest.fixture
def note(request):
    """Attach a line of recorded numbers to the current acceptance criterion."""
    marker = request.node.get_closest_marker("acceptance")
    notes = request.config._acceptance_notes

    def add(text):
        if marker is not None:
            notes.setdefault(marker.args[0], []).append(str(text))

    return add


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            number, title = marker.args
            entry = config._acceptance.setdefault(number, {"title": title, "outcomes": {}})
            entry["outcomes"][item.nodeid] = None


def pytest_runtest_logreport(report):
    for entry in _CONFIG[0]._acceptance.values() if _CONFIG else ():
        if report.nodeid in entry["outcomes"]:
            prev = entry["outcomes"][report.nodeid]
            if report.failed:
                entry["outcomes"][report.nodeid] = "failed"
            elif report.when == "call" and prev is None:
                entry["outcomes"][report.nodeid] = "skipped" if report.skipped else "passed"
            elif report.skipped and prev is None:
                entry["outcomes"][report.nodeid] = "skipped"


_CONFIG = []


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    _CONFIG.append(session.config)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = config._acceptance
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(crit):
        entry = crit[number]
        outcomes = list(entry["outcomes"].values())
        if any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        elif outcomes and all(o == "passed" for o in outcomes):
            verdict = "PASS"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {entry['title']}")
        for line in config._acceptance_notes.get(number, []):
            terminalreporter.write_line(f"        {line}")
