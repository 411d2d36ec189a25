import json
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from airs.model import Instance, PiecewiseLinearCost, PowerCost

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

INSTANCE_B = {"types": [1, 2], "weights": [1, 1], "h": [2, 1],
              "cost": {"family": "power", "exponent": 2}, "budget": 5}
SINGLE = {"types": [1], "weights": [1], "h": [1],
          "cost": {"family": "power", "exponent": 2}, "budget": 1}


@pytest.fixture
def instance_b():
    return Instance(np.array([1.0, 2.0]), np.array([1.0, 1.0]), np.array([2.0, 1.0]),
                    PowerCost(2.0), 5.0)


@pytest.fixture
def single():
    return Instance(np.array([1.0]), np.array([1.0]), np.array([1.0]), PowerCost(2.0), 1.0)


@pytest.fixture
def write_json(tmp_path):
    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return write


def random_instance(rng, m, cost=None, budget=None):
    """Random valid instance: distinct types, positive weights, decreasing h."""
    types = np.arange(1, m + 1, dtype=float)
    weights = rng.uniform(0.1, 5.0, m)
    h = np.sort(rng.uniform(0.1, 10.0, m))[::-1].copy()
    # strictly decreasing even if draws collide
    h = h * (1.0 + 1e-6 * np.arange(m)[::-1])
    if cost is None:
        cost = PowerCost(float(rng.uniform(1.1, 3.0)))
    if budget is None:
        budget = float(rng.uniform(0.1, 20.0))
    return Instance(types, weights, h, cost, budget)


@st.composite
def power_instances(draw, max_m=8, a_min=1.1, a_max=3.0):
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    a = draw(st.floats(a_min, a_max))
    rng = np.random.default_rng(seed)
    return random_instance(rng, m, PowerCost(a))


@st.composite
def polyline_costs(draw, max_pieces=4):
    n = draw(st.integers(1, max_pieces))
    first = draw(st.floats(0.05, 2.0))
    inc = draw(st.lists(st.floats(0.0, 3.0), min_size=n - 1, max_size=n - 1))
    gaps = draw(st.lists(st.floats(0.05, 3.0), min_size=n - 1, max_size=n - 1))
    slopes = np.cumsum([first] + inc)
    return PiecewiseLinearCost(slopes, np.cumsum(gaps) if gaps else np.zeros(0))


@st.composite
def any_instances(draw, max_m=8):
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    if draw(st.booleans()):
        cost = PowerCost(draw(st.floats(1.0, 3.0)), draw(st.floats(0.5, 2.0)))
    else:
        cost = draw(polyline_costs())
    return random_instance(np.random.default_rng(seed), m, cost)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
