"""
Canonical action set: the eight corners of the unit cube around an agent plus stay.

Index 0-7 enumerate (dz, dy, dx) in lexicographic order with +1 before -1;
index 8 keeps the agent in place.
"""
import itertools
from typing import Tuple

from uavmec.core.exceptions import InvalidArgumentError
from uavmec.models.world import Cell

NUM_ACTIONS = 9
STAY = 8

# (dx, dy, dz) per action index
ACTION_VECTORS: Tuple[Tuple[int, int, int], ...] = tuple(
    (dx, dy, dz) for dz, dy, dx in itertools.product((1, -1), repeat=3)
) + ((0, 0, 0),)


def check_action(action: int) -> int:
    if not 0 <= int(action) < NUM_ACTIONS:
        raise InvalidArgumentError(f"Action index must be in 0..{NUM_ACTIONS - 1}, got {action}")
    return int(action)


def _clamp(value: int, upper: int) -> int:
    return min(max(value, 0), upper - 1)


def move(cell: Cell, action: int, bounds: Tuple[int, int, int]) -> Cell:
    """Apply an action and clamp each axis to [0, bound)."""
    dx, dy, dz = ACTION_VECTORS[check_action(action)]
    x, y, z = cell
    return (_clamp(x + dx, bounds[0]), _clamp(y + dy, bounds[1]), _clamp(z + dz, bounds[2]))
