"""Running per-group averages of identity coefficients (the shared face).

State is shared across sessions; every mutation takes the internal lock, and
readers receive copies, so concurrent sessions cannot observe torn updates.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import numpy as np

from .errors import EmptyGroup, GroupUnknown, IoFailure, LengthMismatch
from .model import MorphableModel, synthesize_shape

DEFAULT_GROUPS = ("F", "M")


class CollectiveState:
    """Per-group contribution count and incremental mean identity vector."""

    def __init__(self, n_id: int, groups: tuple[str, ...] = DEFAULT_GROUPS):
        self.n_id = n_id
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {g: 0 for g in groups}
        self._means: dict[str, np.ndarray] = {g: np.zeros(n_id) for g in groups}
        self._last_export: dict[str, int | None] = {g: None for g in groups}

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(self._counts)

    def _require_group(self, group: str) -> None:
        if group not in self._counts:
            raise GroupUnknown(f"unknown collective group {group!r} (have {sorted(self._counts)})")

    def count(self, group: str) -> int:
        self._require_group(group)
        with self._lock:
            return self._counts[group]

    def mean_identity(self, group: str) -> np.ndarray:
        self._require_group(group)
        with self._lock:
            if self._counts[group] == 0:
                raise EmptyGroup(f"group {group!r} has no contributions")
            return self._means[group].copy()

    def contribute(self, group: str, identity: np.ndarray) -> None:
        """Fold one identity vector into the group's running mean.

        Incremental update ``mean += (x - mean) / (count + 1)``, which matches
        the batch mean to rounding and stays stable over long installations.
        """
        self._require_group(group)
        identity = np.asarray(identity, dtype=np.float64)
        if identity.shape != (self.n_id,):
            raise LengthMismatch(f"contribution has length {identity.shape}, need ({self.n_id},)")
        if not np.isfinite(identity).all():
            raise LengthMismatch("contribution contains non-finite values")
        with self._lock:
            count = self._counts[group]
            self._means[group] = self._means[group] + (identity - self._means[group]) / (count + 1)
            self._counts[group] = count + 1

    def mark_exported(self, group: str, timestamp_ms: int) -> None:
        self._require_group(group)
        with self._lock:
            self._last_export[group] = timestamp_ms

    def last_export(self, group: str) -> int | None:
        self._require_group(group)
        with self._lock:
            return self._last_export[group]

    def snapshot(self) -> dict[str, dict]:
        """Consistent per-group view for status reporting."""
        with self._lock:
            return {
                g: {
                    "count": self._counts[g],
                    "mean_identity": self._means[g].tolist() if self._counts[g] else None,
                    "last_export": self._last_export[g],
                }
                for g in self._counts
            }


def contribute(state: CollectiveState, group: str, identity: np.ndarray) -> CollectiveState:
    state.contribute(group, identity)
    return state


def collective_shape(state: CollectiveState, group: str, model: MorphableModel) -> np.ndarray:
    """Neutral reconstruction of the group's mean identity."""
    mean = state.mean_identity(group)
    return synthesize_shape(model, mean, np.zeros(model.n_expr))


def export_collective(
    state: CollectiveState,
    group: str,
    model: MorphableModel,
    path: str | Path,
) -> tuple[Path, Path]:
    """Write the group's averaged face as an OBJ mesh plus a JSON sidecar.

    ``path`` is the mesh path; the sidecar ``{group, count, mean_identity}``
    lands next to it with a ``.json`` suffix. Output is deterministic for a
    fixed state.
    """
    from .render import assemble_mesh, write_mesh  # local import to avoid a cycle

    mesh_path = Path(path)
    sidecar_path = mesh_path.with_suffix(".json")
    shape = collective_shape(state, group, model)
    mesh = assemble_mesh(shape, model)
    write_mesh(mesh, mesh_path, mesh_path.suffix.lstrip(".").upper() or "OBJ")
    payload = {
        "group": group,
        "count": state.count(group),
        "mean_identity": state.mean_identity(group).tolist(),
    }
    try:
        sidecar_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write collective sidecar {sidecar_path}: {exc}") from exc
    state.mark_exported(group, time.time_ns() // 1_000_000)
    return mesh_path, sidecar_path
