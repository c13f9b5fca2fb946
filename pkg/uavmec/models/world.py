"""
Runtime records of the simulator: geometry, world states, transitions and observations.
Numpy arrays are never mutated after a record is built.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError

Cell = Tuple[int, int, int]  # Lattice coordinate (x index, y index, altitude level)


@dataclass(frozen=True)
class Position:
    """A point in metres; h is the height above ground (0 for vehicles)"""
    x: float
    y: float
    h: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise InvalidArgumentError(f"Height must be non-negative, got {self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.h], dtype=float)


@dataclass(frozen=True, eq=False)
class WorldState:
    """Everything a step function needs to know about one time slot"""
    uav_cells: Tuple[Cell, ...]
    frame_index: int = 0
    last_mos: float = 0.0
    monitor_penalties: Optional[np.ndarray] = None  # (rows, cols), values in [-R_max, 0]
    vehicle_density: Optional[np.ndarray] = None    # (y_max, x_max) vehicles per lattice column
    obstacles: Optional[np.ndarray] = None          # (rows, cols) bool

    @property
    def num_agents(self) -> int:
        return len(self.uav_cells)

    @property
    def value_field(self) -> np.ndarray:
        """Per-cell scalar an agent observes: penalties when monitoring, vehicle density otherwise"""
        if self.monitor_penalties is not None:
            return self.monitor_penalties
        if self.vehicle_density is not None:
            return self.vehicle_density
        raise InvalidArgumentError("World state carries neither penalties nor vehicle density")


@dataclass(frozen=True, eq=False)
class Observation:
    """One agent's view: egocentric crop and mean-pooled global map, both (channels, h, w)"""
    local: np.ndarray
    coarse: np.ndarray


@dataclass(frozen=True, eq=False)
class Experience:
    """One joint transition with the shared reward"""
    state: WorldState
    actions: Tuple[int, ...]
    reward: float
    next_state: WorldState
    done: bool
    observations: Optional[Tuple[Observation, ...]] = None       # Cached per-agent views of `state`
    next_observations: Optional[Tuple[Observation, ...]] = None  # Views of `next_state`, needed to bootstrap


@dataclass(frozen=True, eq=False)
class FrameEvaluation:
    """QoE outcome of one slot under a given UAV placement"""
    serving: np.ndarray     # (M,) serving node per vehicle: -1 for the BS, else UAV index
    rates: np.ndarray       # (M,) bit/s
    snrs: np.ndarray        # (M,)
    scores: np.ndarray      # (M,) MOS in [1, 5]

    @property
    def mos_sum(self) -> float:
        return float(self.scores.sum())

    @property
    def offloading_count(self) -> int:
        """Number of UAVs serving at least one vehicle"""
        served = self.serving[self.serving >= 0]
        return int(np.unique(served).size)


@dataclass
class EpisodeStats:
    """Aggregates of one played episode"""
    reward: float = 0.0       # Total shared reward
    mos_total: float = 0.0    # Sum of every scored (slot, vehicle) MOS, slot 0 included
    mos_count: int = 0        # Number of scored (slot, vehicle) entries
    offloading: int = 0       # UAVs serving at least one vehicle at the final slot
    steps: int = 0
    wallclock_ms: float = 0.0

    @property
    def mean_mos(self) -> float:
        return self.mos_total / self.mos_count if self.mos_count else 0.0
