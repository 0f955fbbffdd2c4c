import numpy as np
import pytest

from flexduplex.channel import ChannelParams, InterferenceFlags, build_channel, build_coupling
from flexduplex.harness import SweepConfig, generate_scenario
from flexduplex.model import Direction, MruGrid, Scenario, Service


def random_case(seed, config=SweepConfig()):
    """A random two-cell scenario (random ratios and geometry) with its coupling."""
    rng = np.random.default_rng(seed)
    inter = int(rng.integers(1, 11))
    intra = tuple(int(x) for x in rng.integers(1, 10, size=2))
    scn = generate_scenario(config, inter, intra, rng.integers(2**32))
    chan = build_channel(scn, config.channel, seed=int(rng.integers(2**32)))
    return scn, build_coupling(scn, chan, config.channel, config.flags)


def two_cell(demands=(12500, 12500, 12500, 12500), grid=MruGrid()):
    """Cells 0 and 1 each with one UL then one DL service, UEs spread between the BSs."""
    bs = [[0.0, 0.0], [2000.0, 0.0]]
    ues = [[400.0, 300.0], [600.0, -200.0], [1500.0, 250.0], [1700.0, -100.0]]
    services = [
        Service(0, 0, Direction.UL, demands[0], 0.158),
        Service(1, 0, Direction.DL, demands[1], 20.0),
        Service(2, 1, Direction.UL, demands[2], 0.158),
        Service(3, 1, Direction.DL, demands[3], 20.0),
    ]
    return Scenario(bs, ues, services, grid)


@pytest.fixture
def scn4():
    return two_cell()


@pytest.fixture
def coupling4(scn4):
    params = ChannelParams()
    return build_coupling(scn4, build_channel(scn4, params, seed=7), params, InterferenceFlags())
