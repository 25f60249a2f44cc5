import pytest

from robustq.dp import value_iteration
from robustq.envs import coin_toss_env

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(criterion: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE[criterion] = (bool(ok), detail)
        return bool(ok)
    return _record


@pytest.fixture(scope="session")
def coin_qstar():
    """Exact Q* of the coin-toss game per radius."""
    cache = {}

    def get(eps):
        if eps not in cache:
            cache[eps] = value_iteration(coin_toss_env(eps)).q
        return cache[eps]
    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
