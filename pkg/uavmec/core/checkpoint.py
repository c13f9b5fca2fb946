"""
Binary parameter checkpoints.

Layout (little-endian): b"MAGC", version u32, segment count u32, then per
segment name length u16, UTF-8 name, offset u64, length u64, then every
value as float64.
"""
import logging
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from uavmec.core.exceptions import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MAGC"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_RANGE = struct.Struct("<QQ")

SegmentTable = Dict[str, Tuple[int, int]]  # name -> (offset, length)


def encode_checkpoint(segments: SegmentTable, values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<f8")
    parts = [_HEADER.pack(MAGIC, VERSION, len(segments))]
    for name, (offset, length) in segments.items():
        raw = name.encode("utf-8")
        if offset + length > values.size:
            raise CheckpointError(f"Segment {name} runs past the value vector")
        parts.append(_NAME_LEN.pack(len(raw)) + raw + _RANGE.pack(offset, length))
    parts.append(values.tobytes())
    return b"".join(parts)


def decode_checkpoint(blob: bytes) -> Tuple[SegmentTable, np.ndarray]:
    try:
        magic, version, count = _HEADER.unpack_from(blob, 0)
        if magic != MAGIC:
            raise CheckpointError(f"Bad checkpoint magic {magic!r}")
        if version != VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version}")
        pos = _HEADER.size
        segments: SegmentTable = {}
        for _ in range(count):
            (name_len,) = _NAME_LEN.unpack_from(blob, pos)
            pos += _NAME_LEN.size
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            segments[name] = _RANGE.unpack_from(blob, pos)
            pos += _RANGE.size
    except (struct.error, UnicodeDecodeError) as e:
        raise CheckpointError(f"Truncated or corrupt checkpoint header: {str(e)}")

    payload = blob[pos:]
    if len(payload) % 8:
        raise CheckpointError("Checkpoint payload is not a whole number of float64 values")
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    for name, (offset, length) in segments.items():
        if offset + length > values.size:
            raise CheckpointError(f"Segment {name} runs past the stored values")
    return segments, values


def save_checkpoint(params, path: Union[str, Path]) -> Path:
    """Write a ParameterSet."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = {name: (seg.offset, seg.size) for name, seg in params.segments.items()}
    path.write_bytes(encode_checkpoint(table, params.values))
    logger.info(f"✅ Checkpoint written to {path} ({params.size} values)")
    return path


def load_checkpoint(path: Union[str, Path], params):
    """Read values into a ParameterSet with the same layout as `params`."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}")
    segments, values = decode_checkpoint(blob)
    expected = {name: (seg.offset, seg.size) for name, seg in params.segments.items()}
    if segments != expected or values.size != params.size:
        raise CheckpointError(
            "Checkpoint layout does not match the configured network",
            details={"path": str(path), "stored": len(segments), "expected": len(expected)},
        )
    return params.with_values(values)
