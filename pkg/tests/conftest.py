import pytest

from dcbusflex import builtin_case, run

_criteria: dict[str, bool] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion under ``label``."""
    holder = {}

    def _label(text):
        holder["label"] = text

    yield _label
    label = holder.get("label")
    if label is not None:
        rep = getattr(request.node, "rep_call", None)
        _criteria[label] = bool(rep and rep.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: int(s.split()[0])):
        status = "PASS" if _criteria[label] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {label}")


@pytest.fixture(scope="session")
def case_runs():
    return {n: run(builtin_case(n)) for n in (1, 2, 3)}
