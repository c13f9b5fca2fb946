"""Shared fixtures: small lattices, hand-built trace frames and compact network configs."""
import numpy as np
import pytest

from uavmec.models.trace import TraceFrame
from uavmec.schemas.environment import Lattice, MecConfig, MonitorConfig
from uavmec.schemas.learning import NetworkConfig
from uavmec.schemas.qoe import MosRateMap, MosWeights
from uavmec.schemas.radio import RadioConfig
from uavmec.services.mec_env import MecSetup


def static_frames(xy, count, lane_ids=None):
    """`count` identical frames of vehicles parked at `xy`."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    ids = tuple(range(xy.shape[0]))
    lanes = tuple(lane_ids) if lane_ids is not None else tuple(0 for _ in ids)
    return [TraceFrame(t=t, vehicle_ids=ids, xy=xy.copy(), lane_ids=lanes) for t in range(count)]


@pytest.fixture
def radio():
    return RadioConfig()


@pytest.fixture
def small_lattice():
    return Lattice(x_max=4, y_max=4, z_max=1, cell_size=200.0)


@pytest.fixture
def mec_setup(small_lattice, radio):
    def build(**mec_fields):
        return MecSetup(
            lattice=small_lattice,
            radio=radio,
            mec=MecConfig(**mec_fields),
            rate_map=MosRateMap(),
            weights=MosWeights(),
        )
    return build


@pytest.fixture
def monitor_cfg():
    return MonitorConfig(rows=6, cols=6, coverage_radius=1.0, decay=1.0, penalty_cap=5.0, horizon=10)


@pytest.fixture
def tiny_network():
    return NetworkConfig(window=5, conv_filters=(2, 3), feature_dim=4, attention_dim=3, coarse_factor=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
