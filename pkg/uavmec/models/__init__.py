# Runtime records
from uavmec.models.trace import Block, TraceFrame
from uavmec.models.world import (
    Cell, EpisodeStats, Experience, FrameEvaluation, Observation, Position, WorldState,
)

__all__ = [
    "Block",
    "Cell",
    "EpisodeStats",
    "Experience",
    "FrameEvaluation",
    "Observation",
    "Position",
    "TraceFrame",
    "WorldState",
]
