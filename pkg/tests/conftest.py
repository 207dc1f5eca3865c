import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.stash[_RESULTS] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    results = item.config.stash[_RESULTS]
    prev = results.get(number, (title, True))
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    results[number] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok = results[number]
        terminalreporter.write_line(f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {title}")
    passed = sum(ok for _, ok in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria pass")
