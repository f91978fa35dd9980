"""Shared fixtures: missions and synthesized trial plans"""

import matplotlib

matplotlib.use("Agg")

import pytest

from modules.mission import DEFAULT_MAP, build_grid_map, build_mission
from modules.rbts import SynthConfig
from modules.supervisor import synthesize_recovery

TRIAL_ESTIMATES = {
    1: (1, 2),
    2: (1, 6, 11),
    3: (1, 2, 6, 7),
    4: (1, 2, 3, 4, 5),
}


@pytest.fixture(scope="session")
def mission():
    return build_mission(DEFAULT_MAP)


@pytest.fixture(scope="session")
def small_mission():
    """3x3 map, operational region in the middle, no unsafe zones"""
    return build_mission(build_grid_map(rows=3, cols=3, or_zone=5, unsafe_zones=()))


@pytest.fixture(scope="session")
def synth_config():
    return SynthConfig(budget=1_000_000)


@pytest.fixture(scope="session")
def trial_plans(mission, synth_config):
    return {trial: synthesize_recovery(mission, mission.zone_estimate(zones), synth_config)
            for trial, zones in TRIAL_ESTIMATES.items()}


@pytest.fixture(scope="session")
def corner_mission():
    """4x4 map, operational region in the south-east corner, no unsafe zones"""
    return build_mission(build_grid_map(rows=4, cols=4, or_zone=16, unsafe_zones=()))
