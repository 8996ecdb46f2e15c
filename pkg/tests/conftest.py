import numpy as np
import pytest

from cfhst.channel import build_statistics
from cfhst.geometry import ScenarioConfig, build_snapshot
from cfhst.ici import build_profile

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_setup(seed=0, displacement=100.0, **overrides):
    params = dict(n_aps=4, n_tas=2, antennas=2, rail_length=400.0, train_length=100.0)
    params.update(overrides)
    cfg = ScenarioConfig(**params)
    snap = build_snapshot(cfg, displacement)
    stats = build_statistics(cfg, snap, np.random.default_rng(seed))
    return cfg, snap, stats, build_profile(cfg, snap)


@pytest.fixture
def small():
    return small_setup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
