"""68-point landmark frames, eye geometry, and rigid alignment.

Landmark indices follow the MULTI-PIE 68-point markup. The markup is 1-based
in most references; storage here is 0-based, so the left-eye ring 37..42
becomes 36..41 and the right-eye ring 43..48 becomes 42..47.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

from .errors import (
    DegenerateEyes,
    MalformedRecord,
    NonMonotonicTimestamp,
    WrongPointCount,
)

N_LANDMARKS = 68

# 0-based index ranges of the six-point eye rings (1-based 37-42 and 43-48).
LEFT_EYE_SLICE = slice(36, 42)
RIGHT_EYE_SLICE = slice(42, 48)

DEFAULT_INTER_EYE_PX = 64.0
MIN_INTER_EYE_PX = 1e-6


@dataclass(frozen=True)
class LandmarkFrame:
    """One timestamped 68-point landmark set in image pixel coordinates."""

    timestamp: int
    points: np.ndarray
    image_size: tuple[int, int] = (256, 256)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (N_LANDMARKS, 2):
            raise WrongPointCount(0, f"frame carries {pts.shape} points, need ({N_LANDMARKS}, 2)")
        if not np.isfinite(pts).all():
            raise MalformedRecord(0, "landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class AlignmentTransform:
    """Similarity transform that levels the eye line.

    ``theta`` is the measured eye-line angle (two-argument arctangent of the
    left-to-right eye vector); the 2x3 ``matrix`` rotates by ``-theta`` and
    scales by ``scale`` so that applying it makes the eye line horizontal.
    """

    theta: float
    scale: float
    translation: tuple[float, float]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError("alignment matrix must be 2x3")
        c, s = math.cos(-self.theta), math.sin(-self.theta)
        expected = np.array([
            [self.scale * c, -self.scale * s, self.translation[0]],
            [self.scale * s, self.scale * c, self.translation[1]],
        ])
        if self.scale <= 0 or np.max(np.abs(m - expected)) > 1e-12:
            raise ValueError("alignment matrix is inconsistent with theta/scale/translation")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def eye_centers(frame: LandmarkFrame) -> tuple[np.ndarray, np.ndarray]:
    """Mean of the six left-eye ring points and of the six right-eye ring points."""
    pts = frame.points
    return pts[LEFT_EYE_SLICE].mean(axis=0), pts[RIGHT_EYE_SLICE].mean(axis=0)


def alignment_transform(
    frame: LandmarkFrame,
    d_desired: float = DEFAULT_INTER_EYE_PX,
    out_center: tuple[float, float] | None = None,
) -> AlignmentTransform:
    """Similarity transform leveling the eyes at a target inter-eye distance.

    After the transform the eye line is horizontal, the inter-eye distance is
    ``d_desired`` pixels, and the eye midpoint sits at ``out_center`` (image
    center by default).
    """
    left, right = eye_centers(frame)
    delta = right - left
    dist = float(np.hypot(delta[0], delta[1]))
    if dist <= MIN_INTER_EYE_PX:
        raise DegenerateEyes(f"inter-eye distance {dist:.3e} px is below {MIN_INTER_EYE_PX} px")
    theta = math.atan2(delta[1], delta[0])
    scale = d_desired / dist
    if out_center is None:
        out_center = (frame.image_size[0] / 2.0, frame.image_size[1] / 2.0)

    c, s = math.cos(-theta), math.sin(-theta)
    rot = np.array([[scale * c, -scale * s], [scale * s, scale * c]])
    midpoint = (left + right) / 2.0
    t = np.asarray(out_center, dtype=np.float64) - rot @ midpoint
    matrix = np.hstack([rot, t[:, None]])
    return AlignmentTransform(theta=theta, scale=scale, translation=(float(t[0]), float(t[1])), matrix=matrix)


def apply_alignment(transform: AlignmentTransform, frame: LandmarkFrame) -> LandmarkFrame:
    """Map every landmark through the 2x3 affine matrix (homogeneous form)."""
    pts = frame.points @ transform.matrix[:, :2].T + transform.matrix[:, 2]
    return LandmarkFrame(timestamp=frame.timestamp, points=pts, image_size=frame.image_size)


def parse_landmark_stream(reader: IO[str]) -> Iterator[LandmarkFrame]:
    """Yield frames from a JSONL landmark stream, enforcing the record schema.

    Each line is ``{"t": <int ms>, "w": <int>, "h": <int>, "pts": [[x, y] x 68]}``.
    Timestamps must be non-decreasing. Errors carry the 1-based line number.
    """
    last_t = None
    for line_no, line in enumerate(reader, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise MalformedRecord(line_no, "record is not an object")
        try:
            t = int(rec["t"])
            w = int(rec["w"])
            h = int(rec["h"])
            pts = rec["pts"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, f"missing or bad field: {exc}") from exc
        if not isinstance(pts, list) or len(pts) != N_LANDMARKS:
            raise WrongPointCount(line_no, f"record has {len(pts) if isinstance(pts, list) else '?'} points")
        arr = np.asarray(pts, dtype=np.float64)
        if arr.shape != (N_LANDMARKS, 2) or not np.isfinite(arr).all():
            raise MalformedRecord(line_no, "points must be 68 finite [x, y] pairs")
        if last_t is not None and t < last_t:
            raise NonMonotonicTimestamp(line_no, f"timestamp {t} < previous {last_t}")
        last_t = t
        yield LandmarkFrame(timestamp=t, points=arr, image_size=(w, h))


def frame_to_record(frame: LandmarkFrame) -> str:
    """One JSONL line for a frame (inverse of the stream parser)."""
    return json.dumps({
        "t": int(frame.timestamp),
        "w": int(frame.image_size[0]),
        "h": int(frame.image_size[1]),
        "pts": [[float(x), float(y)] for x, y in frame.points],
    }, separators=(",", ":"))
