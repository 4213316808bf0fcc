import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from semiflow.grid import make_grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def band_limited(rng, grid, modes=8, scale=1.0):
    x = 2 * np.pi * grid.nodes / grid.length
    out = np.zeros(grid.n_points)
    for j in range(modes + 1):
        a, b = rng.normal(size=2) * scale / (1.0 + j) ** 2
        out += a * np.cos(j * x) + b * np.sin(j * x)
    return out


def positive_density(rng, grid, low=0.5, high=2.0):
    f = band_limited(rng, grid)
    f = (f - f.min()) / (np.ptp(f) + 1e-300)
    return low + (high - low) * f


@pytest.fixture
def grid64():
    return make_grid(64)


@pytest.fixture
def grid128():
    return make_grid(128)


def pytest_terminal_summary(terminalreporter):
    results = {}
    for mod in list(sys.modules.values()):
        if getattr(mod, "__file__", "") and mod.__file__.endswith("test_acceptance.py"):
            results.update(getattr(mod, "RESULTS", {}))
    if results:
        terminalreporter.section("acceptance criteria")
        for _, (_, line) in sorted(results.items()):
            terminalreporter.write_line(line)
