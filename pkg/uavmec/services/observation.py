"""
Per-agent observations: an egocentric crop plus a mean-pooled global map.

Channels: 0 value field (penalties or vehicle density), 1 obstacle mask,
2 other-agent mask. Grid rows index y, columns index x.
"""
from typing import Tuple

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError
from uavmec.models.world import Observation, WorldState
from uavmec.utils.enums import ObservationScope

NUM_CHANNELS = 3


def state_channels(state: WorldState, agent: int) -> np.ndarray:
    """(3, rows, cols) stack seen by one agent."""
    field = np.asarray(state.value_field, dtype=float)
    obstacles = state.obstacles if state.obstacles is not None else np.zeros(field.shape, dtype=bool)
    others = np.zeros(field.shape, dtype=float)
    for n, (x, y, _) in enumerate(state.uav_cells):
        if n != agent and 0 <= y < field.shape[0] and 0 <= x < field.shape[1]:
            others[y, x] = 1.0
    return np.stack([field, obstacles.astype(float), others])


def crop(channels: np.ndarray, center: Tuple[int, int], window: int) -> np.ndarray:
    """window x window patch around (row, col), zero outside the grid."""
    half = window // 2
    padded = np.pad(channels, ((0, 0), (half, half), (half, half)))
    r, c = center
    return padded[:, r:r + window, c:c + window].copy()


def mean_pool(channels: np.ndarray, factor: int) -> np.ndarray:
    """Block means after zero-padding each spatial side up to a multiple of factor."""
    ch, rows, cols = channels.shape
    pad_r, pad_c = (-rows) % factor, (-cols) % factor
    padded = np.pad(channels, ((0, 0), (0, pad_r), (0, pad_c)))
    h, w = padded.shape[1] // factor, padded.shape[2] // factor
    return padded.reshape(ch, h, factor, w, factor).mean(axis=(2, 4))


def coarse_shape(grid_shape: Tuple[int, int], factor: int) -> Tuple[int, int, int]:
    return NUM_CHANNELS, -(-grid_shape[0] // factor), -(-grid_shape[1] // factor)


def observe(
    state: WorldState,
    agent: int,
    window: int,
    coarse_factor: int,
    scope: ObservationScope = ObservationScope.GLOBAL,
) -> Observation:
    if not 0 <= agent < state.num_agents:
        raise InvalidArgumentError(f"Agent index {agent} out of range for {state.num_agents} agents")
    if window < 1 or window % 2 == 0:
        raise InvalidArgumentError(f"Observation window must be odd and positive, got {window}")
    if coarse_factor < 1:
        raise InvalidArgumentError(f"coarse_factor must be at least 1, got {coarse_factor}")

    channels = state_channels(state, agent)
    x, y, _ = state.uav_cells[agent]
    coarse = mean_pool(channels, coarse_factor)
    if scope == ObservationScope.LOCAL:
        coarse = np.zeros_like(coarse)
    return Observation(local=crop(channels, (y, x), window), coarse=coarse)


def observe_all(state, window, coarse_factor, scope=ObservationScope.GLOBAL):
    return tuple(observe(state, n, window, coarse_factor, scope) for n in range(state.num_agents))
