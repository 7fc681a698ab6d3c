import pytest

_LINES: dict[int, str] = {}


class Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.recorded = False

    def check(self, ok: bool, detail: str = "") -> bool:
        self.recorded = True
        line = f"criterion {self.number:>2}  {'PASS' if ok else 'FAIL'}  {self.title}"
        _LINES[self.number] = line + (f"  [{detail}]" if detail else "")
        print(_LINES[self.number])
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("acceptance")
    crit = Criterion(*marker.args)
    yield crit
    if not crit.recorded:
        crit.check(False, "raised before reaching its check")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
