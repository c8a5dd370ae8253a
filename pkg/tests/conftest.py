"""Collects acceptance-criterion outcomes and prints them after the run."""

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    passed = call.excinfo is None
    detail = dict(item.user_properties).get("detail", "")
    prev = _ACCEPTANCE.get(number)
    if prev is not None:
        passed = passed and prev[1]
        detail = "; ".join(d for d in (prev[2], detail) if d)
    _ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
