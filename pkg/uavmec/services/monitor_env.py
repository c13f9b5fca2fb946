"""
Constant-monitoring environment.

Every cell of a rows x cols map holds a penalty in [-R_max, 0]. Cells inside
an agent's sensing circle reset to 0; every other cell sinks by the decay
rate each slot. The shared reward is the sum of all penalties.
"""
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from uavmec.core.exceptions import ConfigError, InvalidArgumentError
from uavmec.core.seeding import make_rng
from uavmec.models.world import Cell, WorldState
from uavmec.schemas.environment import MonitorConfig
from uavmec.services.actions import ACTION_VECTORS, check_action
from uavmec.services.trace_io import load_occupancy_map
from uavmec.utils.enums import MapSource

logger = logging.getLogger(__name__)


# ============ Maps ============

def overlay_map(imported: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Imported obstacles placed at the top-left of a rows x cols free grid, cropped or padded."""
    grid = np.zeros((rows, cols), dtype=bool)
    h, w = min(rows, imported.shape[0]), min(cols, imported.shape[1])
    grid[:h, :w] = imported[:h, :w]
    return grid


def build_obstacles(cfg: MonitorConfig, base_dir: Optional[Union[str, Path]] = None) -> np.ndarray:
    if cfg.map_source == MapSource.GRID:
        return np.zeros((cfg.rows, cfg.cols), dtype=bool)
    path = Path(cfg.map_path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    imported = load_occupancy_map(path)
    if cfg.map_source == MapSource.IMPORTED:
        return imported
    return overlay_map(imported, cfg.rows, cfg.cols)


def coverage_mask(shape: Tuple[int, int], cells: Sequence[Cell], radius: float) -> np.ndarray:
    """Cells whose centre lies within `radius` of at least one agent."""
    rows, cols = np.indices(shape)
    covered = np.zeros(shape, dtype=bool)
    for x, y, _ in cells:
        covered |= (rows - y) ** 2 + (cols - x) ** 2 <= radius * radius
    return covered


# ============ Transition ============

def _move_on_map(cell: Cell, action: int, obstacles: np.ndarray) -> Cell:
    dx, dy, _ = ACTION_VECTORS[check_action(action)]
    rows, cols = obstacles.shape
    x = min(max(cell[0] + dx, 0), cols - 1)
    y = min(max(cell[1] + dy, 0), rows - 1)
    if obstacles[y, x]:
        return cell
    return x, y, 0


def step_monitor(state: WorldState, actions: Sequence[int], cfg: MonitorConfig) -> Tuple[WorldState, float, bool]:
    """Move agents, refresh covered cells, decay the rest; return (next state, reward, done)."""
    if len(actions) != state.num_agents:
        raise InvalidArgumentError(f"Expected {state.num_agents} actions, got {len(actions)}")
    if state.monitor_penalties is None:
        raise InvalidArgumentError("World state carries no monitoring penalties")
    penalties = state.monitor_penalties
    obstacles = state.obstacles if state.obstacles is not None else np.zeros(penalties.shape, dtype=bool)

    cells = tuple(_move_on_map(cell, action, obstacles) for cell, action in zip(state.uav_cells, actions))
    covered = coverage_mask(penalties.shape, cells, cfg.coverage_radius)
    updated = np.where(covered, 0.0, np.maximum(penalties - cfg.decay, -cfg.penalty_cap))
    next_index = state.frame_index + 1
    next_state = WorldState(
        uav_cells=cells,
        frame_index=next_index,
        monitor_penalties=updated,
        obstacles=obstacles,
    )
    return next_state, float(updated.sum()), next_index >= cfg.horizon


class MonitorEnvironment:
    """Monitoring episodes on one fixed map"""

    def __init__(
        self,
        cfg: MonitorConfig,
        num_agents: int,
        seed: int = 0,
        base_dir: Optional[Union[str, Path]] = None,
        obstacles: Optional[np.ndarray] = None,
    ):
        if num_agents < 1:
            raise ConfigError(f"At least one agent is required, got {num_agents}")
        self.cfg = cfg
        self.num_agents = num_agents
        self.horizon = cfg.horizon
        self.obstacles = build_obstacles(cfg, base_dir) if obstacles is None else np.asarray(obstacles, dtype=bool)
        free = int((~self.obstacles).sum())
        if free < num_agents:
            raise ConfigError(f"Map has {free} free cells for {num_agents} agents")
        self._rng = make_rng(seed)
        self.state: Optional[WorldState] = None

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.obstacles.shape

    @property
    def reward_bound(self) -> float:
        """Largest possible |reward|: every cell at the penalty cap."""
        return float(self.obstacles.size * self.cfg.penalty_cap)

    def reset(self) -> WorldState:
        """Agents on distinct random free cells, every penalty at 0."""
        free_y, free_x = np.nonzero(~self.obstacles)
        picks = self._rng.choice(free_y.size, size=self.num_agents, replace=False)
        cells = tuple((int(free_x[i]), int(free_y[i]), 0) for i in picks)
        self.state = WorldState(
            uav_cells=cells,
            frame_index=0,
            monitor_penalties=np.zeros(self.obstacles.shape, dtype=float),
            obstacles=self.obstacles,
        )
        return self.state

    def step(self, actions: Sequence[int]) -> Tuple[WorldState, float, bool]:
        if self.state is None:
            raise InvalidArgumentError("reset() must be called before step()")
        self.state, reward, done = step_monitor(self.state, actions, self.cfg)
        return self.state, reward, done

    def episode_summary(self) -> Tuple[float, int, int]:
        # No vehicles are scored while monitoring
        return 0.0, 0, 0
