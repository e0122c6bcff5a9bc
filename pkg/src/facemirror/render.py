"""Mesh assembly, 2D projection, reprojection diagnostics, and mesh export.

Export formats are ASCII OBJ and PLY with floats printed at 9 significant
digits, so identical input produces byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, IoFailure, UnsupportedFormat
from .fitting import Pose, coordinate_rows
from .landmarks import LandmarkFrame
from .model import MorphableModel, synthesize_color


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray          # (N, 3)
    triangles: np.ndarray         # (T, 3)
    colors: np.ndarray | None = None  # (N, 3) RGB in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DimensionMismatch("mesh vertices must be (N, 3)")
        if not np.isfinite(v).all():
            raise DimensionMismatch("mesh vertices must be finite")
        if t.size and int(t.max()) >= v.shape[0]:
            raise DimensionMismatch("triangle index out of range")
        if self.colors is not None and np.asarray(self.colors).shape != v.shape:
            raise DimensionMismatch("colors must be (N, 3)")
        object.__setattr__(self, "vertices", v)


def assemble_mesh(
    shape: np.ndarray,
    model: MorphableModel,
    color_coeffs: np.ndarray | None = None,
) -> Mesh:
    """De-interleave a 3N shape vector into a mesh with the model's topology."""
    shape = np.asarray(shape, dtype=np.float64)
    if shape.shape != (3 * model.n_vertices,):
        raise DimensionMismatch(f"shape length {shape.shape} != 3*n_vertices")
    colors = None
    if color_coeffs is not None:
        colors = synthesize_color(model, color_coeffs).reshape(-1, 3)
    return Mesh(vertices=shape.reshape(-1, 3), triangles=model.topology, colors=colors)


def project_vertices(points, pose: Pose) -> np.ndarray:
    """Scaled-orthographic projection ``s * (R[:2] @ X) + s * t`` per point."""
    pts = points.vertices if isinstance(points, Mesh) else np.asarray(points, dtype=np.float64)
    return pts @ (pose.scale * pose.rotation[:2]).T + pose.scale * pose.translation


def reprojection_rmse(
    frame: LandmarkFrame,
    shape: np.ndarray,
    pose: Pose,
    correspondence: np.ndarray,
) -> float:
    """RMS 2D distance between projected correspondence vertices and landmarks."""
    rows = coordinate_rows(correspondence)
    projected = project_vertices(np.asarray(shape)[rows].reshape(-1, 3), pose)
    return float(np.sqrt(np.mean(np.sum((projected - frame.points) ** 2, axis=1))))


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_mesh(mesh: Mesh, path: str | Path, fmt: str = "OBJ") -> None:
    """Write an ASCII OBJ (v/f records, 1-based) or PLY (with per-vertex color)."""
    fmt = fmt.upper()
    if fmt == "OBJ":
        text = obj_text(mesh)
    elif fmt == "PLY":
        text = ply_text(mesh)
    else:
        raise UnsupportedFormat(f"unsupported mesh format {fmt!r} (use OBJ or PLY)")
    try:
        Path(path).write_text(text, encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot write mesh to {path}: {exc}") from exc


def obj_text(mesh: Mesh) -> str:
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    return "\n".join(lines) + "\n"


def ply_text(mesh: Mesh) -> str:
    has_color = mesh.colors is not None
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    body = []
    if has_color:
        rgb = np.clip(np.rint(np.asarray(mesh.colors) * 255.0), 0, 255).astype(int)
        for (x, y, z), (r, g, b) in zip(mesh.vertices, rgb):
            body.append(f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {r} {g} {b}")
    else:
        body = [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices]
    body += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    return "\n".join(header + body) + "\n"


def read_obj(path: str | Path) -> Mesh:
    """Minimal OBJ reader (v and f records only), mainly for round-trip checks."""
    vertices, triangles = [], []
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            triangles.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        triangles=np.asarray(triangles, dtype=np.uint32).reshape(-1, 3),
    )
