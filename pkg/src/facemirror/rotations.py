"""Small rotation-matrix and quaternion helpers used by pose code."""

from __future__ import annotations

import numpy as np


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a 3x3 matrix onto proper rotations (SVD polar factor)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a rotation matrix (Shepperd's method)."""
    r = np.asarray(r, dtype=np.float64)
    t = np.trace(r)
    if t > 0:
        w = 0.5 * np.sqrt(1.0 + t)
        f = 0.25 / w
        q = np.array([w, f * (r[2, 1] - r[1, 2]), f * (r[0, 2] - r[2, 0]), f * (r[1, 0] - r[0, 1])])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        x = 0.5 * np.sqrt(max(0.0, 1.0 + r[i, i] - r[j, j] - r[k, k]))
        f = 0.25 / x
        q = np.empty(4)
        q[0] = f * (r[k, j] - r[j, k])
        q[1 + i] = x
        q[1 + j] = f * (r[j, i] + r[i, j])
        q[1 + k] = f * (r[k, i] + r[i, k])
    return q / np.linalg.norm(q)


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a quaternion (w, x, y, z); normalizes first."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def average_rotations(rotations: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """Weighted quaternion mean of rotations, sign-aligned to the last entry.

    The averaged quaternion is renormalized and converted back, then projected
    to the nearest rotation as a numerical safety net.
    """
    quats = np.stack([quat_from_matrix(r) for r in rotations])
    ref = quats[-1]
    signs = np.where(quats @ ref < 0.0, -1.0, 1.0)
    mean = (quats * (signs * np.asarray(weights))[:, None]).sum(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return rotations[-1].copy()
    return nearest_rotation(matrix_from_quat(mean / norm))


def rotation_angle(r_a: np.ndarray, r_b: np.ndarray) -> float:
    """Geodesic angle in radians between two rotations."""
    c = (np.trace(r_a.T @ r_b) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation drawn uniformly over the rotation group (normalized Gaussian quaternion)."""
    q = rng.standard_normal(4)
    return matrix_from_quat(q / np.linalg.norm(q))
