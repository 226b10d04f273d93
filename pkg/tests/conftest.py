"""Shared fixtures and the acceptance summary printer.

Tests marked ``@pytest.mark.acceptance(number, title)`` are aggregated per
number; a criterion passes when every test carrying its number passes.  One
line per criterion is printed at the end of the session.
"""

from collections import OrderedDict

import pytest

_results = OrderedDict()
_details = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    num, title = mark.args
    ok = rep.passed if rep.when == "call" else False
    prev = _results.get(num, (title, True))
    _results[num] = (title, prev[1] and ok)


@pytest.fixture
def detail(request):
    """Attach a short measurement string to the current criterion line."""
    mark = request.node.get_closest_marker("acceptance")

    def add(text):
        if mark is not None:
            _details.setdefault(mark.args[0], []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        title, ok = _results[num]
        extra = "; ".join(_details.get(num, []))
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}" + (f" ({extra})" if extra else ""))
