"""Wire protocol v1: canonical JSON text messages and binary geometry frames.

The full byte layout is documented in protocol.md at the repository root.
Text messages are JSON objects serialized canonically (sorted keys, no
whitespace). Geometry frames are binary: the 4 magic bytes ``MODF`` followed by
little-endian fields.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import UnknownCommand

PROTOCOL_VERSION = 1
GEOMETRY_MAGIC = b"MODF"  # reads as the big-endian u32 0x4D4F4446

MODE_COEFFICIENTS = 0
MODE_VERTICES = 1
MODE_NAMES = {"coefficients": MODE_COEFFICIENTS, "vertices": MODE_VERTICES}

FLAG_TRANSFORM_ACTIVE = 0x01
FLAG_MORPH_HOLD = 0x02

# command name -> (required argument names, optional argument names)
COMMAND_ARGS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "hello": (("version",), ("mode",)),
    "begin_calibration": ((), ()),
    "end_calibration": ((), ()),
    "set_transform": (("tag",), ("box_scale", "period")),
    "clear_transform": ((), ()),
    "set_morph_hold": (("hold",), ()),
    "assign_collective": (("group",), ()),
    "get_status": ((), ()),
    "frame": (("t", "w", "h", "pts"), ()),
}

_HEADER = struct.Struct("<IBBHQff")          # seq, mode, flags, reserved, t_ms, rmse, morph_p
_POSE = struct.Struct("<12f")                # rotation row-major, scale, tx, ty


def canonical(message: dict) -> str:
    """Canonical text encoding: sorted keys, compact separators."""
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def parse_command(text: str) -> dict:
    """Parse and structurally validate one client command."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnknownCommand(f"not valid JSON: {exc}") from exc
    if not isinstance(msg, dict) or "cmd" not in msg:
        raise UnknownCommand("message must be an object with a 'cmd' field")
    name = msg["cmd"]
    if name not in COMMAND_ARGS:
        raise UnknownCommand(f"unknown command {name!r}")
    required, optional = COMMAND_ARGS[name]
    allowed = {"cmd", *required, *optional}
    missing = [a for a in required if a not in msg]
    extra = [k for k in msg if k not in allowed]
    if missing or extra:
        raise UnknownCommand(
            f"command {name!r}: missing {missing or 'nothing'}, unexpected {extra or 'nothing'}"
        )
    return msg


def encode_geometry_frame(
    seq: int,
    mode: int,
    timestamp_ms: int,
    rmse: float,
    morph_p: float | None,
    morph_hold: bool,
    rotation: np.ndarray,
    scale: float,
    translation: np.ndarray,
    identity: np.ndarray,
    expression: np.ndarray,
    vertices: np.ndarray | None,
) -> bytes:
    flags = 0
    if morph_p is not None:
        flags |= FLAG_TRANSFORM_ACTIVE
    if morph_hold:
        flags |= FLAG_MORPH_HOLD
    parts = [
        GEOMETRY_MAGIC,
        _HEADER.pack(seq, mode, flags, 0, timestamp_ms, rmse, 0.0 if morph_p is None else morph_p),
        _POSE.pack(*rotation.reshape(-1), scale, *translation),
    ]
    if mode == MODE_COEFFICIENTS:
        parts.append(struct.pack("<HH", len(identity), len(expression)))
        parts.append(np.asarray(identity, dtype="<f4").tobytes())
        parts.append(np.asarray(expression, dtype="<f4").tobytes())
    elif mode == MODE_VERTICES:
        if vertices is None:
            raise ValueError("vertices mode requires geometry")
        parts.append(struct.pack("<I", len(vertices) // 3))
        parts.append(np.asarray(vertices, dtype="<f4").tobytes())
    else:
        raise ValueError(f"unknown geometry mode {mode}")
    return b"".join(parts)


def decode_geometry_frame(data: bytes) -> dict:
    """Inverse of ``encode_geometry_frame``; used by tests and Python clients."""
    if data[:4] != GEOMETRY_MAGIC:
        raise ValueError("bad geometry frame magic")
    seq, mode, flags, _, t_ms, rmse, morph_p = _HEADER.unpack_from(data, 4)
    pose_vals = _POSE.unpack_from(data, 4 + _HEADER.size)
    offset = 4 + _HEADER.size + _POSE.size
    out = {
        "seq": seq,
        "mode": mode,
        "transform_active": bool(flags & FLAG_TRANSFORM_ACTIVE),
        "morph_hold": bool(flags & FLAG_MORPH_HOLD),
        "t_ms": t_ms,
        "rmse": rmse,
        "morph_p": morph_p if flags & FLAG_TRANSFORM_ACTIVE else None,
        "rotation": np.asarray(pose_vals[:9], dtype=np.float64).reshape(3, 3),
        "scale": float(pose_vals[9]),
        "translation": np.asarray(pose_vals[10:12], dtype=np.float64),
    }
    if mode == MODE_COEFFICIENTS:
        n_id, n_expr = struct.unpack_from("<HH", data, offset)
        offset += 4
        out["identity"] = np.frombuffer(data, dtype="<f4", count=n_id, offset=offset).astype(np.float64)
        offset += 4 * n_id
        out["expression"] = np.frombuffer(data, dtype="<f4", count=n_expr, offset=offset).astype(np.float64)
    elif mode == MODE_VERTICES:
        (n_vertices,) = struct.unpack_from("<I", data, offset)
        offset += 4
        out["vertices"] = np.frombuffer(data, dtype="<f4", count=3 * n_vertices, offset=offset).astype(np.float64)
    else:
        raise ValueError(f"unknown geometry mode {mode}")
    return out
