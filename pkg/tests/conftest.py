import pytest

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, title)(ok, detail)``."""

    def start(n: int, title: str):
        ACCEPTANCE[n] = (title, False, "did not finish")

        def finish(ok: bool, detail: str = ""):
            ACCEPTANCE[n] = (title, bool(ok), detail)
            print(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}  {detail}")
            assert ok, f"criterion {n} failed: {detail}"

        return finish

    return start


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}  {detail}")
