import pytest

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    entry = _criteria.setdefault(props["criterion"], {"title": props.get("title", ""), "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
    if props.get("detail"):
        entry["detail"] = props["detail"]


@pytest.fixture
def criterion(request, record_property):
    """Tag a test as an acceptance criterion; returns a callable to attach a summary line."""
    mark = request.node.get_closest_marker("criterion")
    number, title = mark.args
    record_property("criterion", number)
    record_property("title", title)

    def detail(text: str) -> None:
        record_property("detail", text)

    return detail


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        c = _criteria[number]
        status = "PASS" if c["passed"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {c['title']}. {c['detail']}")
