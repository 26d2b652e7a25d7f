from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from datamarket.allocation import AllocationProblem

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@st.composite
def problems(draw, max_k: int = 8, max_n: int = 10, max_price: int = 60, max_value: int = 150,
             diminishing: bool = False) -> AllocationProblem:
    """Small allocation problems where every triple is used by some mapping."""
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_k))
    prices = draw(st.lists(st.integers(0, max_price), min_size=n, max_size=n))
    required = [set(draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=min(n, 5))))
                for _ in range(k)]
    # hand unused triples to random mappings so every index is referenced
    for t in set(range(n)) - set().union(*required):
        required[draw(st.integers(0, k - 1))].add(t)
    budget = draw(st.integers(0, sum(prices) + 10))
    if diminishing:
        sched = sorted(draw(st.lists(st.integers(0, max_value), min_size=k, max_size=k)), reverse=True)
        return AllocationProblem((0,) * k, tuple(prices), tuple(frozenset(r) for r in required), budget,
                                 schedule=tuple(sched))
    values = draw(st.lists(st.integers(0, max_value), min_size=k, max_size=k))
    return AllocationProblem(tuple(values), tuple(prices), tuple(frozenset(r) for r in required), budget)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
