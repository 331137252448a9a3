import numpy as np
import pytest

from rfcoherence.emitter import EmitterParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def populations(p1, p2=0.0, **kw):
    return EmitterParams(p0=1.0 - p1 - p2, p1=p1, p2=p2, **kw)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {name}: {detail}")
