import pytest

_RESULTS: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    row = _RESULTS.setdefault(number, {"title": title, "ok": True, "seconds": 0.0})
    row["seconds"] += rep.duration
    if rep.failed or (rep.when == "call" and not rep.passed):
        row["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        row = _RESULTS[number]
        status = "PASS" if row["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {row['title']} ({row['seconds']:.2f} s)")
