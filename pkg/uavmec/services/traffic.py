"""
Vehicle mobility on lane networks and per-block density monitoring.

Synthetic traces are random-turn walks on a rows x cols grid of lanes; one
frame per 1 s slot.
"""
import logging
from collections import Counter
from typing import Dict, List, Sequence

import numpy as np

from uavmec.core.exceptions import ConfigError, InvalidArgumentError
from uavmec.core.seeding import make_rng
from uavmec.models.trace import Block, TraceFrame
from uavmec.schemas.traffic import Intersection, Lane, LaneNetwork

logger = logging.getLogger(__name__)

SLOT_SECONDS = 1.0
PLACEMENT_HEADWAY = 5.0     # metres between vehicles at placement time
DEFAULT_BLOCK_LENGTH = 100.0
DEFAULT_SPEED_LIMIT = 60.0 / 3.6  # 60 km/h in m/s
MIN_SPEED_FRACTION = 0.5


# ============ Network ============

def build_grid_network(
    rows: int,
    cols: int,
    block_length: float = DEFAULT_BLOCK_LENGTH,
    speed_limit: float = DEFAULT_SPEED_LIMIT,
) -> LaneNetwork:
    """Manhattan grid: intersection (r, c) sits at (c*L, r*L); lanes join 4-neighbours."""
    if rows < 2 or cols < 2:
        raise ConfigError(f"Grid needs at least 2x2 intersections, got {rows}x{cols}")
    intersections = [
        Intersection(id=r * cols + c, x=c * block_length, y=r * block_length)
        for r in range(rows) for c in range(cols)
    ]
    lanes: List[Lane] = []
    for r in range(rows):
        for c in range(cols - 1):
            lanes.append(Lane(id=len(lanes), from_id=r * cols + c, to_id=r * cols + c + 1,
                              length=block_length, speed_limit=speed_limit))
    for r in range(rows - 1):
        for c in range(cols):
            lanes.append(Lane(id=len(lanes), from_id=r * cols + c, to_id=(r + 1) * cols + c,
                              length=block_length, speed_limit=speed_limit))
    return LaneNetwork(intersections=intersections, lanes=lanes)


class _GridWalker:
    """Random-turn walk state of every vehicle: lane, travel direction and distance travelled"""

    def __init__(self, net: LaneNetwork, rng: np.random.Generator):
        self.net = net
        self.rng = rng
        self.lanes = net.lane_map()
        self.nodes = net.intersection_map()
        self.incident: Dict[int, List[int]] = {
            node_id: sorted(lane.id for lane in net.incident_lanes(node_id)) for node_id in self.nodes
        }
        self.lane_of: List[int] = []
        self.forward: List[bool] = []
        self.travelled: List[float] = []

    def place(self, num_vehicles: int) -> None:
        slots = [(lane.id, k) for lane in self.net.lanes for k in range(int(lane.length // PLACEMENT_HEADWAY))]
        if num_vehicles > len(slots):
            raise ConfigError(
                f"Cannot place {num_vehicles} vehicles: lane capacity at {PLACEMENT_HEADWAY:g} m headway is {len(slots)}"
            )
        chosen = self.rng.choice(len(slots), size=num_vehicles, replace=False)
        for index in chosen:
            lane_id, k = slots[int(index)]
            forward = bool(self.rng.integers(2))
            offset = (k + 0.5) * PLACEMENT_HEADWAY
            self.lane_of.append(lane_id)
            self.forward.append(forward)
            self.travelled.append(offset)

    def advance(self) -> None:
        for v in range(len(self.lane_of)):
            lane = self.lanes[self.lane_of[v]]
            remaining = lane.speed_limit * self.rng.uniform(MIN_SPEED_FRACTION, 1.0) * SLOT_SECONDS
            while True:
                lane = self.lanes[self.lane_of[v]]
                to_end = lane.length - self.travelled[v]
                if remaining < to_end:
                    self.travelled[v] += remaining
                    break
                remaining -= to_end
                node = lane.to_id if self.forward[v] else lane.from_id
                options = [lid for lid in self.incident[node] if lid != lane.id] or [lane.id]
                next_id = options[int(self.rng.integers(len(options)))]
                self.lane_of[v] = next_id
                self.forward[v] = self.lanes[next_id].from_id == node
                self.travelled[v] = 0.0

    def positions(self) -> np.ndarray:
        xy = np.empty((len(self.lane_of), 2), dtype=float)
        for v, lane_id in enumerate(self.lane_of):
            lane = self.lanes[lane_id]
            start, end = self.nodes[lane.from_id], self.nodes[lane.to_id]
            along = self.travelled[v] if self.forward[v] else lane.length - self.travelled[v]
            fraction = along / lane.length
            xy[v, 0] = start.x + fraction * (end.x - start.x)
            xy[v, 1] = start.y + fraction * (end.y - start.y)
        return xy


def generate_grid_traces(
    rows: int,
    cols: int,
    num_vehicles: int,
    horizon: int,
    seed: int,
    block_length: float = DEFAULT_BLOCK_LENGTH,
    speed_limit: float = DEFAULT_SPEED_LIMIT,
) -> List[TraceFrame]:
    """Frames for slots 0..horizon of num_vehicles random-turn walkers on a grid."""
    if num_vehicles < 1:
        raise ConfigError(f"At least one vehicle is required, got {num_vehicles}")
    if horizon < 0:
        raise ConfigError(f"Horizon must be non-negative, got {horizon}")
    net = build_grid_network(rows, cols, block_length, speed_limit)
    walker = _GridWalker(net, make_rng(seed))
    walker.place(num_vehicles)

    vehicle_ids = tuple(range(num_vehicles))
    frames: List[TraceFrame] = []
    for t in range(horizon + 1):
        if t > 0:
            walker.advance()
        frames.append(TraceFrame(t=t, vehicle_ids=vehicle_ids, xy=walker.positions(), lane_ids=tuple(walker.lane_of)))
    logger.debug(f"Generated {len(frames)} frames for {num_vehicles} vehicles on a {rows}x{cols} grid")
    return frames


# ============ Density monitoring ============

def _lane_counts(frame: TraceFrame) -> Counter:
    return Counter(frame.lane_ids)


def _density(counts: Counter, lanes: Sequence[Lane]) -> float:
    return sum(counts.get(lane.id, 0) for lane in lanes) / sum(lane.length for lane in lanes)


def block_density(frame: TraceFrame, net: LaneNetwork, intersection_id: int) -> float:
    """Vehicles on the lanes incident to an intersection divided by their total length."""
    if intersection_id not in net.intersection_map():
        raise InvalidArgumentError(f"Unknown intersection {intersection_id}")
    lanes = net.incident_lanes(intersection_id)
    if not lanes:
        raise InvalidArgumentError(f"Intersection {intersection_id} has no incident lanes")
    return _density(_lane_counts(frame), lanes)


def blocks(frame: TraceFrame, net: LaneNetwork) -> List[Block]:
    """Every block of the network with its current density, ordered by intersection id."""
    counts = _lane_counts(frame)
    result = []
    for node in sorted(net.intersections, key=lambda i: i.id):
        lanes = net.incident_lanes(node.id)
        if lanes:
            result.append(Block(
                intersection_id=node.id,
                lane_ids=tuple(lane.id for lane in lanes),
                density=_density(counts, lanes),
            ))
    return result


def detect_shortage(frame: TraceFrame, net: LaneNetwork, threshold: float) -> List[int]:
    """Ids of blocks whose density exceeds the threshold, ascending."""
    if threshold <= 0:
        raise InvalidArgumentError(f"Density threshold must be positive, got {threshold}")
    return [block.intersection_id for block in blocks(frame, net) if block.density > threshold]


def shortage_report(frames: Sequence[TraceFrame], net: LaneNetwork, threshold: float) -> Dict[int, List[int]]:
    """Slots with a detected shortage mapped to the congested block ids."""
    report = {}
    for frame in frames:
        congested = detect_shortage(frame, net, threshold)
        if congested:
            report[frame.t] = congested
    return report
