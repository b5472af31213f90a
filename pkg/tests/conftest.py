import pytest

# filled by tests/test_acceptance.py: (criterion id, title, passed, detail)
ACCEPTANCE = []


@pytest.fixture
def record():
    def _record(cid, title, passed, detail):
        ACCEPTANCE.append((cid, title, bool(passed), detail))
        assert passed, f"criterion {cid} ({title}) failed: {detail}"
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {cid:>2}. {title}: {detail}")
