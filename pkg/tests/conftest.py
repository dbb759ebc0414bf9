import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def detail(request):
    """Mutable dict; the test stores a one-line summary under 'text'."""
    box = {"text": ""}
    request.node._criterion_detail = box
    return box


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    box = getattr(item, "_criterion_detail", {"text": ""})
    text = box["text"]
    if rep.failed and call.excinfo is not None:
        msg = str(call.excinfo.value).splitlines()[0] if str(call.excinfo.value) else call.excinfo.typename
        text = f"{text}; {msg}" if text else msg
    _RESULTS[marker.args[0]] = (rep.passed, text)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, text = _RESULTS[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {text}")
