"""Synthetic landmark-stream generation for demos, benchmarks, and replay inputs.

Frames are produced by forward-projecting a model's correspondence vertices
under scripted poses and expressions, so downstream fits have an exact ground
truth to recover.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fitting import Pose, coordinate_rows
from .landmarks import LandmarkFrame, frame_to_record
from .model import MorphableModel
from .render import project_vertices
from .rotations import matrix_from_quat, random_rotation


def project_frame(
    model: MorphableModel,
    identity: np.ndarray,
    expression: np.ndarray,
    pose: Pose,
    timestamp: int,
    image_size: tuple[int, int] = (256, 256),
) -> LandmarkFrame:
    """Exact landmark frame for the given coefficients and pose."""
    rows = coordinate_rows(model.landmark_vertices)
    shape_r = model.mean_shape[rows] + model.identity_basis[rows] @ identity
    if model.n_expr:
        shape_r = shape_r + model.expression_basis[rows] @ expression
    pts = project_vertices(shape_r.reshape(-1, 3), pose)
    return LandmarkFrame(timestamp=timestamp, points=pts, image_size=image_size)


def random_in_box(rng: np.random.Generator, sigma: np.ndarray, box_k: float, fill: float = 0.8) -> np.ndarray:
    """Coefficients uniform in ``fill`` of the per-component box."""
    return rng.uniform(-1.0, 1.0, size=sigma.shape) * (fill * box_k * sigma)


@dataclass(frozen=True)
class WanderingPose:
    """Smooth head motion: slow yaw/pitch oscillation at steady scale."""

    base_scale: float = 1.5
    yaw_amplitude: float = 0.35
    pitch_amplitude: float = 0.2
    period_frames: int = 240

    def pose_at(self, t: int) -> Pose:
        w = 2.0 * np.pi * t / self.period_frames
        yaw = self.yaw_amplitude * np.sin(w)
        pitch = self.pitch_amplitude * np.sin(0.7 * w + 1.0)
        q_yaw = np.array([np.cos(yaw / 2), 0.0, np.sin(yaw / 2), 0.0])
        q_pitch = np.array([np.cos(pitch / 2), np.sin(pitch / 2), 0.0, 0.0])
        w1, x1, y1, z1 = q_yaw
        w2, x2, y2, z2 = q_pitch
        q = np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])
        return Pose(rotation=matrix_from_quat(q), scale=self.base_scale, translation=np.array([40.0, 50.0]))


def synthetic_stream(
    model: MorphableModel,
    n_frames: int,
    seed: int = 0,
    *,
    identity: np.ndarray | None = None,
    moving: bool = True,
    expression_amplitude: float = 0.6,
    neutral_frames: int = 3,
    frame_interval_ms: int = 16,
    image_size: tuple[int, int] = (256, 256),
) -> tuple[list[LandmarkFrame], np.ndarray]:
    """Noiseless landmark stream of one synthetic person.

    Returns the frames plus the ground-truth identity coefficients. Expression
    coefficients oscillate sinusoidally inside the box once the first
    ``neutral_frames`` frames have passed (a participant holds a neutral face
    while calibrating).
    """
    rng = np.random.default_rng(seed)
    if identity is None:
        identity = random_in_box(rng, model.identity_sigma, box_k=3.0, fill=0.6)
    motion = WanderingPose()
    frames = []
    for t in range(n_frames):
        if moving:
            pose = motion.pose_at(t)
        else:
            pose = Pose(rotation=np.eye(3), scale=1.5, translation=np.array([40.0, 50.0]))
        if model.n_expr and t >= neutral_frames:
            phase = 2.0 * np.pi * (t - neutral_frames) / 90.0 + np.arange(model.n_expr)
            q = expression_amplitude * model.expression_sigma * np.sin(phase)
        else:
            q = np.zeros(model.n_expr)
        frames.append(project_frame(model, identity, q, pose, timestamp=t * frame_interval_ms,
                                    image_size=image_size))
    return frames, identity


def random_pose(rng: np.random.Generator,
                scale_range: tuple[float, float] = (0.5, 3.0),
                translation_range: float = 50.0) -> Pose:
    """Pose with rotation uniform over the rotation group."""
    return Pose(
        rotation=random_rotation(rng),
        scale=float(rng.uniform(*scale_range)),
        translation=rng.uniform(-translation_range, translation_range, size=2),
    )


def write_landmark_jsonl(frames: list[LandmarkFrame], path: str | Path) -> None:
    Path(path).write_text("".join(frame_to_record(f) + "\n" for f in frames), encoding="utf-8")
