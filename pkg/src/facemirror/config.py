"""Service configuration: dataclass defaults plus a key=value config file."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .fitting import FitConfig

MODEL_DIR_ENV = "MOD_MODEL_DIR"


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8642
    model_dir: str = "models"
    frame_rate: float = 60.0
    calibration_frames: int = 30
    box_k: float = 3.0
    ridge: float = 1e-6
    smoothing_window: int = 3
    smoothing_weight: float = 1.0 / 3.0
    refine_iterations: int = 3
    d_desired: float = 64.0
    morph_period: int = 300
    morph_box_scale: float = 3.0
    export_dir: str = "collective_out"

    def fit_config(self) -> FitConfig:
        return FitConfig(
            box_k=self.box_k,
            ridge=self.ridge,
            smoothing_window=self.smoothing_window,
            smoothing_weight=self.smoothing_weight,
            calibration_frames=self.calibration_frames,
            refine_iterations=self.refine_iterations,
        )


def _parse_value(raw: str, kind: type):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        raw = raw[1:-1]
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Config from a key=value file (``#`` comments allowed), with defaults for
    anything unset. ``MOD_MODEL_DIR`` in the environment overrides model_dir."""
    config = ServiceConfig()
    kinds = {f.name: type(getattr(config, f.name)) for f in fields(config)}
    if path is not None:
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in kinds:
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            setattr(config, key, _parse_value(raw, kinds[key]))
    env_dir = os.environ.get(MODEL_DIR_ENV)
    if env_dir:
        config.model_dir = env_dir
    return config
