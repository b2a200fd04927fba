import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            num, title = m.args
            entry = _CRITERIA.setdefault(num, {"title": title, "outcomes": []})
            item.user_properties.append(("criterion", num))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        _CRITERIA[props["criterion"]]["outcomes"].append((report.nodeid, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outs = [o for _, o in entry["outcomes"]]
        status = "PASS" if outs and all(o == "passed" for o in outs) else "FAIL"
        terminalreporter.write_line(f"{status}  {num}. {entry['title']}")
