"""
UAV-assisted MEC decision process.

UAVs sit on a discrete lattice above the trace area. Each slot every UAV picks
one of the nine canonical moves, vehicles are re-assigned to the nearest
covering UAV (or the BS) and the shared reward compares the new MOS sum with
the previous slot's.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from uavmec.core.exceptions import ConfigError, InvalidArgumentError
from uavmec.core.seeding import make_rng
from uavmec.models.trace import TraceFrame
from uavmec.models.world import Cell, FrameEvaluation, Position, WorldState
from uavmec.schemas.environment import Lattice, MecConfig
from uavmec.schemas.qoe import MosRateMap, MosWeights
from uavmec.schemas.radio import RadioConfig
from uavmec.services.actions import move
from uavmec.services.channel import bs_snr, bs_throughput, uav_links
from uavmec.services.qoe import DelayScorer, mos_episode_total, score_vehicles

logger = logging.getLogger(__name__)

REWARD_UP = 0.8
REWARD_FLAT = -0.1
REWARD_DOWN = -0.8
REWARD_BOUND = 0.8  # max |reward|


@dataclass(frozen=True)
class MecSetup:
    """Configuration bundle the MEC step function reads"""
    lattice: Lattice
    radio: RadioConfig
    mec: MecConfig
    rate_map: MosRateMap
    weights: MosWeights
    delay_scorer: Optional[DelayScorer] = None

    def horizon(self, traces: Sequence[TraceFrame]) -> int:
        """Index of the last slot an episode reaches (T_p)."""
        last = len(traces) - 1
        return last if self.mec.horizon is None else min(last, self.mec.horizon)


# ============ Geometry ============

def cell_position(lattice: Lattice, cell: Cell, radio: RadioConfig) -> Position:
    x, y, z = cell
    return Position(x=x * lattice.step, y=y * lattice.step, h=radio.uav_height + z * lattice.step)


def _cells_xyz(cells: Sequence[Cell], lattice: Lattice, radio: RadioConfig) -> np.ndarray:
    arr = np.asarray(cells, dtype=float).reshape(-1, 3)
    xyz = arr * lattice.step
    xyz[:, 2] += radio.uav_height
    return xyz


def all_cells(lattice: Lattice) -> List[Cell]:
    return [(x, y, z) for x in range(lattice.x_max) for y in range(lattice.y_max) for z in range(lattice.z_max)]


def marginal_cells(lattice: Lattice, count: int, radio: RadioConfig) -> List[Cell]:
    """The count lattice points farthest from the BS (ties in coordinate order)."""
    bs = np.array([0.0, 0.0, radio.bs_height])
    cells = all_cells(lattice)
    distances = np.linalg.norm(_cells_xyz(cells, lattice, radio) - bs, axis=1)
    order = sorted(range(len(cells)), key=lambda i: (-distances[i], cells[i]))
    return [cells[order[i % len(order)]] for i in range(count)]


def vehicle_density(frame: TraceFrame, lattice: Lattice) -> np.ndarray:
    """Vehicle count under every lattice column, shape (y_max, x_max)."""
    grid = np.zeros((lattice.y_max, lattice.x_max), dtype=float)
    if frame.num_vehicles:
        ix = np.clip(np.rint(frame.xy[:, 0] / lattice.step).astype(int), 0, lattice.x_max - 1)
        iy = np.clip(np.rint(frame.xy[:, 1] / lattice.step).astype(int), 0, lattice.y_max - 1)
        np.add.at(grid, (iy, ix), 1.0)
    return grid


# ============ QoE of one slot ============

def assign_serving(uav_xyz: np.ndarray, vehicle_xy: np.ndarray, coverage_radius: float) -> np.ndarray:
    """Nearest covering UAV per vehicle (lowest index on ties), -1 for the BS."""
    if vehicle_xy.shape[0] == 0:
        return np.empty(0, dtype=int)
    if uav_xyz.shape[0] == 0:
        return np.full(vehicle_xy.shape[0], -1, dtype=int)
    diff = uav_xyz[:, None, :2] - vehicle_xy[None, :, :]
    horizontal = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    masked = np.where(horizontal <= coverage_radius, horizontal, np.inf)
    nearest = np.argmin(masked, axis=0)
    covered = np.isfinite(masked.min(axis=0))
    return np.where(covered, nearest, -1).astype(int)


def evaluate_frame(uav_cells: Sequence[Cell], frame: TraceFrame, setup: MecSetup) -> FrameEvaluation:
    """Serving assignment, rates, SNRs and MOS of every vehicle in a slot."""
    m = frame.num_vehicles
    uav_xyz = _cells_xyz(uav_cells, setup.lattice, setup.radio)
    serving = assign_serving(uav_xyz, frame.xy, setup.mec.coverage_radius_m)
    rates = np.zeros(m, dtype=float)
    snrs = np.zeros(m, dtype=float)

    on_bs = np.flatnonzero(serving < 0)
    if on_bs.size:
        rates[on_bs] = bs_throughput(int(on_bs.size), setup.radio)
        snrs[on_bs] = bs_snr(int(on_bs.size), setup.radio)

    vehicle_xyz = np.column_stack([frame.xy, np.zeros(m)]) if m else np.empty((0, 3))
    for n in range(uav_xyz.shape[0]):
        members = np.flatnonzero(serving == n)
        if members.size:
            rates[members], snrs[members] = uav_links(uav_xyz[n], vehicle_xyz[members], int(members.size), setup.radio)

    scores = score_vehicles(rates, snrs, setup.radio, setup.rate_map, setup.weights, setup.delay_scorer)
    return FrameEvaluation(serving=serving, rates=rates, snrs=snrs, scores=scores)


def mos_reward(previous: float, current: float, tolerance: float) -> float:
    """Shared reward from the change in summed MOS between consecutive slots."""
    if abs(current - previous) <= tolerance:
        return REWARD_FLAT
    return REWARD_UP if current > previous else REWARD_DOWN


# ============ Transition ============

def _transition(
    state: WorldState,
    actions: Sequence[int],
    traces: Sequence[TraceFrame],
    setup: MecSetup,
) -> Tuple[WorldState, float, bool, FrameEvaluation]:
    if len(actions) != state.num_agents:
        raise InvalidArgumentError(f"Expected {state.num_agents} actions, got {len(actions)}")
    horizon = setup.horizon(traces)
    next_index = state.frame_index + 1
    if next_index > horizon:
        raise InvalidArgumentError(f"No frame for slot {next_index}; the episode ends at slot {horizon}")

    bounds = (setup.lattice.x_max, setup.lattice.y_max, setup.lattice.z_max)
    cells = tuple(move(cell, action, bounds) for cell, action in zip(state.uav_cells, actions))
    frame = traces[next_index]
    evaluation = evaluate_frame(cells, frame, setup)
    mos_next = evaluation.mos_sum
    reward = mos_reward(state.last_mos, mos_next, setup.mec.tie_tolerance)
    next_state = WorldState(
        uav_cells=cells,
        frame_index=next_index,
        last_mos=mos_next,
        vehicle_density=vehicle_density(frame, setup.lattice),
        obstacles=state.obstacles,
    )
    return next_state, reward, next_index >= horizon, evaluation


def step_mec(
    state: WorldState,
    actions: Sequence[int],
    traces: Sequence[TraceFrame],
    setup: MecSetup,
) -> Tuple[WorldState, float, bool]:
    """Move every UAV, score the next slot and return (next state, shared reward, done)."""
    next_state, reward, done, _ = _transition(state, actions, traces, setup)
    return next_state, reward, done


class MecEnvironment:
    """Stateful wrapper replaying one trace per episode"""

    def __init__(self, traces: Sequence[TraceFrame], setup: MecSetup, num_uavs: int, seed: int = 0):
        if num_uavs < 1:
            raise ConfigError(f"At least one UAV is required, got {num_uavs}")
        if len(traces) < 2:
            raise ConfigError("A trace needs at least two frames to run an episode")
        initial = setup.mec.initial_cells
        if initial is not None:
            if len(initial) != num_uavs:
                raise ConfigError(f"initial_cells lists {len(initial)} cells for {num_uavs} UAVs")
            if not all(setup.lattice.contains(tuple(c)) for c in initial):
                raise ConfigError("initial_cells must lie inside the lattice")
        self.traces = list(traces)
        self.setup = setup
        self.num_agents = num_uavs
        self.horizon = setup.horizon(self.traces)
        self._rng = make_rng(seed)
        self._obstacles = np.zeros((setup.lattice.y_max, setup.lattice.x_max), dtype=bool)
        self.state: Optional[WorldState] = None
        self.last_evaluation: Optional[FrameEvaluation] = None
        self.episode_scores: List[np.ndarray] = []

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.setup.lattice.y_max, self.setup.lattice.x_max

    @property
    def reward_bound(self) -> float:
        return REWARD_BOUND

    def initial_cells(self) -> Tuple[Cell, ...]:
        lattice = self.setup.lattice
        if self.setup.mec.initial_cells is not None:
            return tuple(tuple(int(v) for v in c) for c in self.setup.mec.initial_cells)
        if self.setup.mec.marginal_init:
            return tuple(marginal_cells(lattice, self.num_agents, self.setup.radio))
        cells = all_cells(lattice)
        picks = self._rng.integers(len(cells), size=self.num_agents)
        return tuple(cells[int(i)] for i in picks)

    def state_for(self, cells: Sequence[Cell], frame_index: int = 0) -> WorldState:
        """World state with the given UAV cells at a slot, scored as the previous cycle."""
        frame = self.traces[frame_index]
        evaluation = evaluate_frame(cells, frame, self.setup)
        self.last_evaluation = evaluation
        return WorldState(
            uav_cells=tuple(cells),
            frame_index=frame_index,
            last_mos=evaluation.mos_sum,
            vehicle_density=vehicle_density(frame, self.setup.lattice),
            obstacles=self._obstacles,
        )

    def reset(self) -> WorldState:
        self.state = self.state_for(self.initial_cells(), 0)
        self.episode_scores = [self.last_evaluation.scores]
        return self.state

    def step(self, actions: Sequence[int]) -> Tuple[WorldState, float, bool]:
        if self.state is None:
            raise InvalidArgumentError("reset() must be called before step()")
        self.state, reward, done, self.last_evaluation = _transition(self.state, actions, self.traces, self.setup)
        self.episode_scores.append(self.last_evaluation.scores)
        return self.state, reward, done

    def mos_at(self, cells: Sequence[Cell], frame_index: int = 0) -> float:
        return evaluate_frame(cells, self.traces[frame_index], self.setup).mos_sum

    def episode_summary(self) -> Tuple[float, int, int]:
        """(summed MOS, scored entries, serving UAVs at the latest slot) of the running episode."""
        # Early-stopped episodes end before the horizon; total over the slots actually played.
        # Slots with fewer vehicles are zero-padded.
        width = max(scores.size for scores in self.episode_scores)
        table = np.zeros((len(self.episode_scores), width))
        for k, scores in enumerate(self.episode_scores):
            table[k, : scores.size] = scores
        mos_total = mos_episode_total(table, len(self.episode_scores) - 1)
        mos_count = int(sum(scores.size for scores in self.episode_scores))
        offloading = self.last_evaluation.offloading_count if self.last_evaluation is not None else 0
        return mos_total, mos_count, offloading
