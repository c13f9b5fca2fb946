"""
File formats for vehicle traces, lane networks and occupancy maps.

Trace CSV: header `t,vehicle_id,x,y,lane_id`, one row per (slot, vehicle),
sorted by (t, vehicle_id), UTF-8 with LF line endings.
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from uavmec.core.exceptions import TraceFormatError
from uavmec.models.trace import TraceFrame
from uavmec.schemas.traffic import LaneNetwork

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
TRACE_COLUMNS = ["t", "vehicle_id", "x", "y", "lane_id"]
LANE_TOLERANCE = 0.5  # metres a trace position may sit off its lane segment


# ============ Trace CSV ============

def frames_to_dataframe(frames: Sequence[TraceFrame]) -> pd.DataFrame:
    parts = [
        pd.DataFrame({
            "t": np.full(frame.num_vehicles, frame.t, dtype=np.int64),
            "vehicle_id": np.asarray(frame.vehicle_ids, dtype=np.int64),
            "x": frame.xy[:, 0] if frame.num_vehicles else np.empty(0),
            "y": frame.xy[:, 1] if frame.num_vehicles else np.empty(0),
            "lane_id": np.asarray(frame.lane_ids, dtype=np.int64),
        })
        for frame in frames
    ]
    if not parts:
        return pd.DataFrame(columns=TRACE_COLUMNS)
    df = pd.concat(parts, ignore_index=True)
    return df.sort_values(["t", "vehicle_id"], kind="stable").reset_index(drop=True)


def write_traces(frames: Sequence[TraceFrame], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames_to_dataframe(frames).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"✅ Wrote {len(frames)} trace frames to {path}")
    return path


def read_traces(path: PathLike) -> List[TraceFrame]:
    """Parse a trace CSV into one frame per slot from 0 to the last slot present."""
    path = Path(path)
    try:
        df = pd.read_csv(path, float_precision="round_trip", encoding="utf-8")
    except FileNotFoundError:
        raise TraceFormatError("Trace file not found", config_path=str(path))
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise TraceFormatError(f"Unreadable trace file: {str(e)}", config_path=str(path))

    if list(df.columns) != TRACE_COLUMNS:
        raise TraceFormatError(
            f"Expected header {','.join(TRACE_COLUMNS)}, got {','.join(map(str, df.columns))}",
            config_path=str(path),
        )
    if df.empty:
        return []
    try:
        df = df.astype({"t": np.int64, "vehicle_id": np.int64, "x": float, "y": float, "lane_id": np.int64})
    except (ValueError, TypeError) as e:
        raise TraceFormatError(f"Bad value in trace file: {str(e)}", config_path=str(path))
    if (df["t"] < 0).any():
        raise TraceFormatError("Slot index t must be non-negative", config_path=str(path))
    if df.duplicated(["t", "vehicle_id"]).any():
        raise TraceFormatError("Duplicate (t, vehicle_id) rows", config_path=str(path))

    df = df.sort_values(["t", "vehicle_id"], kind="stable")
    grouped = {int(t): group for t, group in df.groupby("t", sort=True)}
    frames = []
    for t in range(int(df["t"].max()) + 1):
        group = grouped.get(t)
        if group is None:
            frames.append(TraceFrame(t=t, vehicle_ids=(), xy=np.empty((0, 2)), lane_ids=()))
            continue
        frames.append(TraceFrame(
            t=t,
            vehicle_ids=tuple(int(v) for v in group["vehicle_id"]),
            xy=group[["x", "y"]].to_numpy(dtype=float, copy=True),
            lane_ids=tuple(int(v) for v in group["lane_id"]),
        ))
    logger.info(f"Loaded {len(frames)} trace frames from {path}")
    return frames


def validate_traces(
    frames: Sequence[TraceFrame],
    net: LaneNetwork,
    path: Optional[PathLike] = None,
    tolerance: float = LANE_TOLERANCE,
) -> None:
    """Every vehicle must sit on a known lane, within `tolerance` metres of its segment."""
    source = str(path) if path is not None else None
    lanes = net.lane_map()
    nodes = net.intersection_map()
    for frame in frames:
        if not frame.num_vehicles:
            continue
        unknown = sorted({lane_id for lane_id in frame.lane_ids if lane_id not in lanes})
        if unknown:
            raise TraceFormatError(
                f"Slot {frame.t} references unknown lanes {unknown}",
                config_path=source,
                details={"t": frame.t, "lane_ids": unknown},
            )
        ends = [(nodes[lanes[lane_id].from_id], nodes[lanes[lane_id].to_id]) for lane_id in frame.lane_ids]
        a = np.array([[start.x, start.y] for start, _ in ends])
        b = np.array([[end.x, end.y] for _, end in ends])
        seg = b - a
        length_sq = np.einsum("ij,ij->i", seg, seg)
        rel = np.einsum("ij,ij->i", frame.xy - a, seg)
        along = np.clip(np.divide(rel, length_sq, out=np.zeros_like(rel), where=length_sq > 0), 0.0, 1.0)
        offset = np.linalg.norm(frame.xy - (a + along[:, None] * seg), axis=1)
        off_lane = np.flatnonzero(offset > tolerance)
        if off_lane.size:
            k = int(off_lane[0])
            raise TraceFormatError(
                f"Slot {frame.t}: vehicle {frame.vehicle_ids[k]} is {offset[k]:.3f} m off lane {frame.lane_ids[k]}",
                config_path=source,
                details={"t": frame.t, "vehicle_id": frame.vehicle_ids[k], "offset_m": float(offset[k])},
            )


# ============ Lane network JSON ============

def load_network(path: PathLike) -> LaneNetwork:
    path = Path(path)
    try:
        return LaneNetwork.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TraceFormatError("Lane network file not found", config_path=str(path))
    except ValidationError as e:
        raise TraceFormatError(f"Invalid lane network: {str(e)}", config_path=str(path))


def save_network(net: LaneNetwork, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(net.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
    return path


# ============ Occupancy maps ============

def parse_occupancy_map(text: str) -> np.ndarray:
    """'.' is free, '#' is an obstacle; one grid row per line."""
    lines = [line.rstrip("\r") for line in text.split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise TraceFormatError("Occupancy map is empty")
    width = len(lines[0])
    if any(len(line) != width for line in lines):
        raise TraceFormatError("Occupancy map rows must have equal length")
    bad = set("".join(lines)) - {".", "#"}
    if bad:
        raise TraceFormatError(f"Unexpected occupancy map characters: {''.join(sorted(bad))}")
    return np.array([[ch == "#" for ch in line] for line in lines], dtype=bool)


def load_occupancy_map(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TraceFormatError("Occupancy map not found", config_path=str(path))
    try:
        return parse_occupancy_map(text)
    except TraceFormatError as e:
        raise TraceFormatError(e.message, config_path=str(path))
