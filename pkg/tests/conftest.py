from importlib import resources

import pytest

from semfuse.config import RunConfig
from semfuse.srl import LabelVocab

FIXTURES = resources.files("semfuse") / "fixtures"


@pytest.fixture(scope="session")
def fixtures():
    return FIXTURES


@pytest.fixture(scope="session")
def labels():
    return LabelVocab.fixture()


@pytest.fixture
def tiny_cfg():
    """A small, fast configuration for harness-level tests."""
    return RunConfig(d_enc=16, n_layers=1, n_heads=2, d_ff=24, epochs=2, batch_size=16, m=2, d_srl=4, gru_hidden=4, d=4)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
