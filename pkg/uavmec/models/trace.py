from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class TraceFrame:
    """Vehicle snapshot of one slot; arrays are aligned by row"""
    t: int
    vehicle_ids: Tuple[int, ...]
    xy: np.ndarray            # (M, 2) metres
    lane_ids: Tuple[int, ...]

    @property
    def num_vehicles(self) -> int:
        return len(self.vehicle_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TraceFrame):
            return NotImplemented
        return (
            self.t == other.t
            and self.vehicle_ids == other.vehicle_ids
            and self.lane_ids == other.lane_ids
            and self.xy.shape == other.xy.shape
            and bool(np.array_equal(self.xy, other.xy))
        )

    __hash__ = None


@dataclass(frozen=True)
class Block:
    """An intersection together with every lane incident to it"""
    intersection_id: int
    lane_ids: Tuple[int, ...]
    density: float  # vehicles per metre
