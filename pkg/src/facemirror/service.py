"""Session orchestration for the live mirror.

A session moves through three phases: awaiting_calibration, calibrating, and
live. Calibration locks the participant's identity coefficients; live frames
then carry fresh pose and expression, optionally routed through a demographic
transform and the sinusoidal morph. The session adds no math of its own: every
geometry value it emits is the composition of library calls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collective import CollectiveState, export_collective
from .config import ServiceConfig
from .errors import (
    FaceMirrorError,
    InvalidPhase,
    ModelLoadFailure,
    UnknownCommand,
    UnknownModelTag,
)
from .fitting import FitConfig, Pose, calibrate, fit_frame, make_pose_history
from .landmarks import LandmarkFrame
from .model import MorphableModel, load_model, synthesize_shape
from .transform import MorphState, TransformSpec, advance_morph, morph_factor, project_identity

PHASE_AWAITING = "awaiting_calibration"
PHASE_CALIBRATING = "calibrating"
PHASE_LIVE = "live"

MODEL_SUFFIX = ".mod3dmm"
GLOBAL_TAG = "global"


@dataclass(frozen=True)
class ModelRegistry:
    """The global model plus any number of demographic target models."""

    global_model: MorphableModel
    bespoke: dict[str, MorphableModel]
    containers: dict[str, bytes]

    def get(self, tag: str) -> MorphableModel:
        if tag == self.global_model.tag:
            return self.global_model
        if tag in self.bespoke:
            return self.bespoke[tag]
        raise UnknownModelTag(f"no model with tag {tag!r} (have {self.tags()})")

    def tags(self) -> list[str]:
        return [self.global_model.tag, *sorted(self.bespoke)]


def load_registry(model_dir: str | Path) -> ModelRegistry:
    """Load every model container in a directory; exactly one must be 'global'."""
    model_dir = Path(model_dir)
    paths = sorted(model_dir.glob(f"*{MODEL_SUFFIX}"))
    if not paths:
        raise ModelLoadFailure(f"no {MODEL_SUFFIX} containers in {model_dir}")
    global_model = None
    bespoke: dict[str, MorphableModel] = {}
    containers: dict[str, bytes] = {}
    for path in paths:
        try:
            model = load_model(path)
        except FaceMirrorError as exc:
            raise ModelLoadFailure(f"{path.name}: {exc}") from exc
        containers[model.tag] = path.read_bytes()
        if model.tag == GLOBAL_TAG:
            if global_model is not None:
                raise ModelLoadFailure("more than one model is tagged 'global'")
            global_model = model
        else:
            bespoke[model.tag] = model
    if global_model is None:
        raise ModelLoadFailure(f"no model tagged '{GLOBAL_TAG}' in {model_dir}")
    for tag, model in bespoke.items():
        if model.n_vertices != global_model.n_vertices:
            raise ModelLoadFailure(f"model {tag!r} vertex count differs from the global model")
    return ModelRegistry(global_model=global_model, bespoke=bespoke, containers=containers)


@dataclass
class FrameOutput:
    """One processed live frame, ready for wire encoding or trace export."""

    seq: int
    timestamp_ms: int
    pose: Pose
    identity: np.ndarray            # global-model coefficients, blended while morphing
    expression: np.ndarray
    morph_p: float | None
    rmse: float
    transform_tag: str | None
    morph_hold: bool
    vertices: np.ndarray | None     # full 3N geometry (vertices mode)
    latency_ms: float | None


class MirrorSession:
    """One participant's mirror: state machine, per-frame pipeline, commands."""

    def __init__(
        self,
        registry: ModelRegistry,
        config: ServiceConfig,
        collective: CollectiveState,
        session_id: str = "local",
        geometry_mode: str = "vertices",
        record_latency: bool = True,
    ):
        self.registry = registry
        self.config = config
        self.collective = collective
        self.session_id = session_id
        self.geometry_mode = geometry_mode
        self.record_latency = record_latency

        self.model = registry.global_model
        self.fit_config: FitConfig = config.fit_config()
        self.phase = PHASE_AWAITING
        self.calibration_buffer: list[LandmarkFrame] = []
        self.identity: np.ndarray | None = None
        self.neutral_shape: np.ndarray | None = None
        self.history = make_pose_history(self.fit_config)
        self.transform: TransformSpec | None = None
        self.morph: MorphState | None = None
        self.target_identity: np.ndarray | None = None
        self.expression_basis: np.ndarray | None = None
        self.frames_processed = 0
        self.seq = 0
        self._latency_window: list[float] = []

    # --- commands ---

    def handle_command(self, cmd: dict) -> dict:
        """Apply one wire command; returns an ack or an err message."""
        name = cmd.get("cmd")
        try:
            handler = getattr(self, f"_cmd_{name}", None)
            if handler is None:
                raise UnknownCommand(f"unknown command {name!r}")
            extras = handler(cmd)
            ack = {"ack": name, "phase": self.phase}
            ack.update(extras or {})
            return ack
        except FaceMirrorError as exc:
            return {"err": type(exc).__name__, "detail": str(exc), "cmd": name}

    def _cmd_begin_calibration(self, cmd: dict) -> dict:
        if self.phase == PHASE_CALIBRATING:
            raise InvalidPhase("calibration already running")
        self.phase = PHASE_CALIBRATING
        self.calibration_buffer = []
        self.identity = None
        self.neutral_shape = None
        self.transform = None
        self.morph = None
        self.history = make_pose_history(self.fit_config)
        return {"frames_needed": self.fit_config.calibration_frames}

    def _cmd_end_calibration(self, cmd: dict) -> dict:
        if self.phase != PHASE_CALIBRATING:
            raise InvalidPhase("no calibration in progress")
        self._finish_calibration()
        return {"frames_used": len(self.calibration_buffer)}

    def _cmd_set_transform(self, cmd: dict) -> dict:
        if self.phase != PHASE_LIVE:
            raise InvalidPhase("set_transform requires a calibrated (live) session")
        spec = TransformSpec(
            target_tag=str(cmd["tag"]),
            box_scale_to_project=float(cmd.get("box_scale", self.config.morph_box_scale)),
            morph_period=int(cmd.get("period", self.config.morph_period)),
        )
        bespoke = self.registry.get(spec.target_tag)
        altered, _ = project_identity(self.neutral_shape, bespoke, spec.box_scale_to_project)
        self.transform = spec
        self.morph = MorphState(frame_counter=0, active=True,
                                source_shape=self.neutral_shape, target_shape=altered)
        # expression deforms through the target's basis when it matches the
        # global one in width, else through the global basis
        if bespoke.n_expr == self.model.n_expr and self.model.n_expr:
            self.expression_basis = bespoke.expression_basis
        else:
            self.expression_basis = self.model.expression_basis
        self.target_identity = self.model.identity_basis.T @ (altered - self.model.mean_shape)
        return {"tag": spec.target_tag, "period": spec.morph_period,
                "box_scale": spec.box_scale_to_project}

    def _cmd_clear_transform(self, cmd: dict) -> dict:
        if self.phase != PHASE_LIVE:
            raise InvalidPhase("clear_transform requires a live session")
        self.transform = None
        self.morph = None
        self.target_identity = None
        self.expression_basis = None
        return {}

    def _cmd_set_morph_hold(self, cmd: dict) -> dict:
        if self.transform is None:
            raise InvalidPhase("no transform active")
        self.transform = TransformSpec(
            target_tag=self.transform.target_tag,
            box_scale_to_project=self.transform.box_scale_to_project,
            morph_period=self.transform.morph_period,
            hold_at_target=bool(cmd["hold"]),
        )
        return {"hold": self.transform.hold_at_target}

    def _cmd_assign_collective(self, cmd: dict) -> dict:
        if self.phase != PHASE_LIVE:
            raise InvalidPhase("assign_collective requires a calibrated identity")
        group = str(cmd["group"])
        self.collective.contribute(group, self.identity)
        return {"group": group, "count": self.collective.count(group)}

    def _cmd_get_status(self, cmd: dict) -> dict:
        latency = float(np.median(self._latency_window)) if self._latency_window else None
        return {
            "session": self.session_id,
            "mode": self.geometry_mode,
            "frames_processed": self.frames_processed,
            "calibration_progress": len(self.calibration_buffer) if self.phase == PHASE_CALIBRATING else None,
            "transform": None if self.transform is None else self.transform.target_tag,
            "morph_hold": bool(self.transform.hold_at_target) if self.transform else False,
            "collective": {g: v["count"] for g, v in self.collective.snapshot().items()},
            "tags": self.registry.tags(),
            "median_latency_ms": latency,
        }

    # --- frames ---

    def _finish_calibration(self) -> None:
        identity, reference = calibrate(self.calibration_buffer, self.model, self.fit_config)
        self.identity = identity
        self.neutral_shape = synthesize_shape(self.model, identity, np.zeros(self.model.n_expr))
        self.history = make_pose_history(self.fit_config)
        if reference is not None:
            self.history.append(reference)
        self.phase = PHASE_LIVE

    def process_frame(self, frame: LandmarkFrame) -> list:
        """Run one frame through the pipeline; returns events and outputs.

        Per-frame fitting errors become ``frame_error`` events and the frame is
        dropped; the session stays live.
        """
        if self.phase == PHASE_AWAITING:
            return [{"event": "frame_ignored", "detail": "session awaits begin_calibration"}]
        if self.phase == PHASE_CALIBRATING:
            self.calibration_buffer.append(frame)
            collected = len(self.calibration_buffer)
            messages = [{"event": "calibration_progress", "collected": collected,
                         "needed": self.fit_config.calibration_frames}]
            if collected >= self.fit_config.calibration_frames:
                self._finish_calibration()
                messages.append({"event": "calibrated", "phase": self.phase})
            return messages

        started = time.perf_counter()
        try:
            fit = fit_frame(frame, self.identity, self.model, self.fit_config,
                            self.history, neutral_shape=self.neutral_shape)
            if self.model.n_expr:
                basis = self.expression_basis if self.transform is not None else self.model.expression_basis
                expression_offset = basis @ fit.expression
            else:
                expression_offset = 0.0
            if self.transform is not None:
                self.morph, blended_neutral = advance_morph(self.morph, self.transform)
                p = morph_factor(self.morph.frame_counter, self.transform.morph_period)
                geometry = blended_neutral + expression_offset
                identity_out = (1.0 - p) * self.identity + p * self.target_identity
            else:
                p = None
                geometry = self.neutral_shape + expression_offset
                identity_out = self.identity
        except FaceMirrorError as exc:
            return [{"event": "frame_error", "detail": str(exc), "kind": type(exc).__name__}]

        latency = (time.perf_counter() - started) * 1000.0 if self.record_latency else None
        if latency is not None:
            self._latency_window.append(latency)
            del self._latency_window[:-120]
        self.frames_processed += 1
        output = FrameOutput(
            seq=self.seq,
            timestamp_ms=frame.timestamp,
            pose=fit.pose,
            identity=identity_out,
            expression=fit.expression,
            morph_p=p,
            rmse=fit.reprojection_rmse,
            transform_tag=self.transform.target_tag if self.transform else None,
            morph_hold=bool(self.transform.hold_at_target) if self.transform else False,
            vertices=geometry if self.geometry_mode == "vertices" else None,
            latency_ms=latency,
        )
        self.seq += 1
        return [output]


def export_all_collectives(
    collective: CollectiveState,
    model: MorphableModel,
    export_dir: str | Path,
) -> list[Path]:
    """Write mesh + sidecar for every non-empty group (used at shutdown)."""
    export_dir = Path(export_dir)
    export_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for group in collective.groups:
        if collective.count(group):
            mesh_path, sidecar = export_collective(
                collective, group, model, export_dir / f"collective_{group}.obj"
            )
            written.extend([mesh_path, sidecar])
    return written
