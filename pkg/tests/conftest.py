import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from parisilab.model import MixtureSpec
from parisilab.parisi import RSBParams

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the terminal summary."""
    def _report(criterion: int, passed: bool, detail: str):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:>2}: {detail}")
        print(ACCEPTANCE_LINES[-1])
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@st.composite
def mixtures(draw, p_max: int = 4, even_only: bool = False, max_sq: float = 0.6):
    squares = {}
    for p in range(1, p_max + 1):
        if even_only and p % 2 and p > 1:
            continue
        if draw(st.booleans()):
            squares[p] = draw(st.floats(0.0, max_sq))
    return MixtureSpec.from_squares(squares) if squares else MixtureSpec.zero(p_max)


@st.composite
def rsb_params(draw, k_max: int = 3, m_lo: float = 0.0, m_hi: float = 1.0):
    k = draw(st.integers(1, k_max))
    m = sorted(draw(st.lists(st.floats(m_lo, m_hi), min_size=k, max_size=k)))
    q = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k)))
    return RSBParams(tuple(m), tuple(q))


def random_params(rng: np.random.Generator, k: int, m_lo: float = 0.0, m_hi: float = 1.0) -> RSBParams:
    m = np.sort(rng.uniform(m_lo, m_hi, k))
    q = np.sort(rng.uniform(0.0, 1.0, k))
    return RSBParams(tuple(m), tuple(q))
