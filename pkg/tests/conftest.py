import pytest

_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; ``check(ok, detail)`` also asserts."""
    name = request.node.get_closest_marker("criterion").args[0]

    def check(ok, detail=""):
        prev_ok, prev_detail = _RESULTS.get(name, (True, ""))
        _RESULTS[name] = (prev_ok and bool(ok), "; ".join(filter(None, [prev_detail, detail])))
        assert ok, f"{name}: {detail}"

    _RESULTS.setdefault(name, (True, ""))
    yield check


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion recorded in the summary")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker and call.excinfo is not None and call.when == "call":
        name = marker.args[0]
        _, detail = _RESULTS.get(name, (True, ""))
        _RESULTS[name] = (False, detail or str(call.excinfo.value).splitlines()[0])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS):
        ok, detail = _RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
