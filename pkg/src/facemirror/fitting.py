"""Per-frame model fitting: scaled-orthographic pose, box-constrained shape
coefficients, temporal pose smoothing, and the calibration procedure.

Projection convention used throughout: a model point ``X`` lands at
``s * (R[:2] @ X) + s * t`` in image coordinates, so the per-frame linear
system recovers ``s * t`` jointly with the scaled rotation rows.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bvls import solve_box_lsq
from .errors import (
    DimensionMismatch,
    EmptyCalibration,
    NumericalFailure,
    RankDeficient,
)
from .landmarks import LandmarkFrame
from .model import MorphableModel
from .rotations import average_rotations, nearest_rotation

ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Scaled-orthographic camera pose: rotation R, uniform scale s, 2D translation t."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.rotation, dtype=np.float64)
        t = np.ascontiguousarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (2,):
            raise DimensionMismatch("pose needs a 3x3 rotation and a 2-vector translation")
        if np.max(np.abs(r.T @ r - np.eye(3))) >= ROTATION_TOL or np.linalg.det(r) <= 0:
            raise NumericalFailure("rotation matrix is not orthogonal with det +1")
        if not self.scale > 0:
            raise NumericalFailure("pose scale must be positive")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class FitConfig:
    """Knobs for per-frame fitting.

    ``box_k`` bounds each coefficient to k standard deviations. ``ridge`` is a
    relative regularization factor; the effective weight on ``||x||^2`` is
    ``ridge * ||A||_F^2 / n_unknowns``, which keeps underdetermined systems
    (few landmarks, many components) deterministic. ``smoothing_weight`` is the
    share of the current frame in the rotation average; at 1/3 a full
    three-frame window averages with equal weights.
    """

    box_k: float = 3.0
    ridge: float = 1e-6
    smoothing_window: int = 3
    smoothing_weight: float = 1.0 / 3.0
    calibration_frames: int = 30
    refine_iterations: int = 3

    def __post_init__(self):
        if self.box_k <= 0:
            raise ValueError("box_k must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be at least 1")
        if not 0.0 <= self.smoothing_weight <= 1.0:
            raise ValueError("smoothing_weight must lie in [0, 1]")
        if self.calibration_frames < 1:
            raise ValueError("calibration_frames must be at least 1")
        if self.refine_iterations < 0:
            raise ValueError("refine_iterations cannot be negative")


@dataclass(frozen=True)
class FitResult:
    pose: Pose
    identity: np.ndarray
    expression: np.ndarray
    reprojection_rmse: float


def coordinate_rows(vertex_indices: np.ndarray) -> np.ndarray:
    """Row indices into a 3N interleaved vector for the given vertices."""
    v = np.asarray(vertex_indices, dtype=np.int64)
    return (3 * v[:, None] + np.arange(3)).reshape(-1)


def estimate_pose(frame: LandmarkFrame, model_points: np.ndarray) -> Pose:
    """Recover (R, s, t) from 2D landmarks and their matched 3D model points.

    Stacks two rows per point, ``[u v w 1 0 0 0 0]`` against the landmark x and
    ``[0 0 0 0 u v w 1]`` against the landmark y, and solves the 8-unknown
    system in least squares. The first and third rows of the unknown vector
    hold the scaled rotation rows; scale is their mean norm, translation is
    ``(k_3/s, k_7/s)``, and the rotation is completed with the normalized cross
    product and projected to the nearest rotation via SVD.
    """
    pts3 = np.asarray(model_points, dtype=np.float64)
    pts2 = frame.points
    if pts3.ndim != 2 or pts3.shape[1] != 3 or pts3.shape[0] != pts2.shape[0]:
        raise DimensionMismatch(f"model points {pts3.shape} do not match {pts2.shape[0]} landmarks")
    n = pts3.shape[0]
    if n < 4:
        raise RankDeficient("pose estimation needs at least 4 points")

    a = np.zeros((2 * n, 8))
    a[0::2, 0:3] = pts3
    a[0::2, 3] = 1.0
    a[1::2, 4:7] = pts3
    a[1::2, 7] = 1.0
    d = pts2.reshape(-1)

    k, _, rank, _ = np.linalg.lstsq(a, d, rcond=None)
    if rank < 8:
        raise RankDeficient(f"pose system rank {rank} < 8 (coplanar or collinear model points)")

    r1, r2 = k[0:3], k[4:7]
    scale = (np.linalg.norm(r1) + np.linalg.norm(r2)) / 2.0
    if not np.isfinite(scale) or scale <= 1e-12:
        raise NumericalFailure("degenerate scale in pose solution")
    translation = np.array([k[3], k[7]]) / scale
    r3 = np.cross(r1, r2)
    n3 = np.linalg.norm(r3)
    if n3 <= 1e-12 * scale * scale:
        raise NumericalFailure("scaled rotation rows are parallel")
    rotation = nearest_rotation(np.vstack([r1 / scale, r2 / scale, r3 / n3]))
    return Pose(rotation=rotation, scale=float(scale), translation=translation)


def _projection_rows(pose: Pose) -> np.ndarray:
    """The shared 2x3 block ``s * R[:2]`` of the block-diagonal projection."""
    return pose.scale * pose.rotation[:2]


def estimate_shape(
    frame: LandmarkFrame,
    pose: Pose,
    model: MorphableModel,
    config: FitConfig,
    mode: str = "identity",
    *,
    fixed_identity: np.ndarray | None = None,
    correspondence: np.ndarray | None = None,
) -> FitResult:
    """Box-constrained shape-coefficient fit for one frame at a fixed pose.

    Builds ``A = proj @ P`` and ``h = landmarks - s*t - proj @ mean`` over the
    68 correspondence vertices and solves ``min ||A x - h||^2 + ridge ||x||^2``
    subject to ``|x_i| <= box_k * sigma_i`` with the active-set solver. ``mode``
    selects the basis: "identity", "expression" (identity held fixed, folded
    into the mean), or "joint".
    """
    vidx = model.landmark_vertices if correspondence is None else np.asarray(correspondence)
    rows = coordinate_rows(vidx)
    n_pts = len(vidx)
    mean_r = model.mean_shape[rows]

    if mode == "identity":
        basis_r = model.identity_basis[rows]
        sigma = model.identity_sigma
    elif mode == "expression":
        if fixed_identity is None:
            raise DimensionMismatch("expression mode requires fixed identity coefficients")
        fixed_identity = np.asarray(fixed_identity, dtype=np.float64)
        if fixed_identity.shape != (model.n_id,):
            raise DimensionMismatch("fixed identity length does not match the model")
        mean_r = mean_r + model.identity_basis[rows] @ fixed_identity
        basis_r = model.expression_basis[rows]
        sigma = model.expression_sigma
    elif mode == "joint":
        basis_r = np.hstack([model.identity_basis[rows], model.expression_basis[rows]])
        sigma = np.concatenate([model.identity_sigma, model.expression_sigma])
    else:
        raise ValueError(f"unknown fit mode {mode!r}")

    r2 = _projection_rows(pose)
    n_coeff = basis_r.shape[1]
    a = np.einsum("ab,ibk->iak", r2, basis_r.reshape(n_pts, 3, n_coeff)).reshape(2 * n_pts, n_coeff)
    proj_mean = mean_r.reshape(n_pts, 3) @ r2.T
    h = (frame.points - pose.scale * pose.translation - proj_mean).reshape(-1)

    if n_coeff:
        ridge = config.ridge * float(np.sum(a * a)) / n_coeff if config.ridge > 0 else 0.0
        bounds = config.box_k * sigma
        solution = solve_box_lsq(a, h, -bounds, bounds, ridge=ridge)
        x = solution.x
        residual = a @ x - h
    else:
        x = np.zeros(0)
        residual = -h
    rmse = float(np.linalg.norm(residual) / np.sqrt(n_pts))

    if mode == "identity":
        identity, expression = x, np.zeros(model.n_expr)
    elif mode == "expression":
        identity, expression = fixed_identity, x
    else:
        identity, expression = x[:model.n_id], x[model.n_id:]
    return FitResult(pose=pose, identity=identity, expression=expression, reprojection_rmse=rmse)


def smooth_pose(history: Sequence[Pose], current: Pose, config: FitConfig) -> Pose:
    """Average the pose over the trailing window (history + current).

    Scale and translation take the plain arithmetic mean. Rotation takes a
    sign-aligned quaternion mean where the current frame carries
    ``smoothing_weight`` and older frames split the remainder evenly.
    """
    window = (list(history) + [current])[-config.smoothing_window:]
    m = len(window)
    if m == 1:
        return current
    scale = float(np.mean([p.scale for p in window]))
    translation = np.mean([p.translation for p in window], axis=0)
    w = config.smoothing_weight
    weights = np.full(m, (1.0 - w) / (m - 1))
    weights[-1] = w
    rotation = average_rotations([p.rotation for p in window], weights)
    return Pose(rotation=rotation, scale=scale, translation=translation)


def make_pose_history(config: FitConfig) -> deque:
    """Ring buffer sized for the smoothing window (raw poses of past frames)."""
    return deque(maxlen=max(1, config.smoothing_window - 1))


def _alternating_fit(
    frame: LandmarkFrame,
    model: MorphableModel,
    config: FitConfig,
    mode: str,
    base_r: np.ndarray,
    basis_r: np.ndarray,
    fixed_identity: np.ndarray | None = None,
) -> tuple[Pose, FitResult]:
    """Alternate pose and shape estimation within one frame until they agree.

    The pose that generated a frame and the coefficients that explain it are
    coupled: a pose estimated against the wrong reference shape leaks shape
    deformation into rigid parameters and vice versa. Re-estimating the pose
    against the currently fitted shape contracts that coupling error, so on
    noiseless input the pair converges to the exact generating values.
    ``base_r`` is the correspondence-restricted shape the coefficients deform
    from, ``basis_r`` the matching restricted basis columns.
    """
    ref = base_r
    pose = None
    fit = None
    prev = None
    for _ in range(config.refine_iterations + 1):
        pose = estimate_pose(frame, ref.reshape(-1, 3))
        fit = estimate_shape(frame, pose, model, config, mode=mode, fixed_identity=fixed_identity)
        x = np.concatenate([fit.identity, fit.expression])
        if prev is not None and np.max(np.abs(x - prev)) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            break
        prev = x
        coeffs = fit.identity if mode == "identity" else fit.expression
        if basis_r.shape[1]:
            ref = base_r + basis_r @ coeffs
    return pose, fit


def calibrate(
    frames: Sequence[LandmarkFrame],
    model: MorphableModel,
    config: FitConfig,
) -> tuple[np.ndarray, Pose]:
    """Identity-only fit over the calibration frames.

    Each frame runs the alternating pose/shape refinement on its own (starting
    from the mean shape; averaging poses across frames with different head
    orientations would bias the fit). The returned coefficients are the
    per-frame mean, re-clamped to the box, alongside the final smoothed pose
    for continuity into live fitting.
    """
    frames = list(frames)
    if not frames:
        raise EmptyCalibration("calibration needs at least one frame")
    rows = coordinate_rows(model.landmark_vertices)
    mean_r = model.mean_shape[rows]
    basis_r = model.identity_basis[rows]
    history = make_pose_history(config)
    smoothed = None
    coeffs = []
    for frame in frames:
        raw, fit = _alternating_fit(frame, model, config, "identity", mean_r, basis_r)
        smoothed = smooth_pose(history, raw, config)
        history.append(raw)
        coeffs.append(fit.identity)
    identity = np.mean(coeffs, axis=0)
    bound = config.box_k * model.identity_sigma
    return np.clip(identity, -bound, bound), smoothed


def fit_frame(
    frame: LandmarkFrame,
    session_identity: np.ndarray,
    model: MorphableModel,
    config: FitConfig,
    history: deque,
    *,
    neutral_shape: np.ndarray | None = None,
) -> FitResult:
    """One live-frame fit with the calibrated identity held fixed.

    Pose starts from the calibrated identity's correspondence vertices and is
    refined alternately with the expression fit, then smoothed over the window
    (the raw converged pose is pushed onto the caller-owned ``history`` ring
    buffer). The expression coefficients reported are the fit at the smoothed
    pose. ``neutral_shape`` may pass a precomputed ``mean + U @ identity``
    vector to skip re-synthesizing it every frame.
    """
    rows = coordinate_rows(model.landmark_vertices)
    if neutral_shape is not None:
        neutral_r = neutral_shape[rows]
    else:
        neutral_r = model.mean_shape[rows] + model.identity_basis[rows] @ session_identity
    raw, fit = _alternating_fit(
        frame, model, config, "expression", neutral_r, model.expression_basis[rows],
        fixed_identity=session_identity,
    )
    smoothed = smooth_pose(history, raw, config)
    history.append(raw)
    if smoothed is raw:
        return fit
    return estimate_shape(
        frame, smoothed, model, config, mode="expression", fixed_identity=session_identity
    )
