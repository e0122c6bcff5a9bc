#!/usr/bin/env python3
"""Generate the browser client's test fixtures from the engine.

Writes into frontend/test/fixtures/:
  - model_global.mod3dmm + model_summary.json   (container parser fixtures)
  - replay_coefficients.jsonl / replay_vertices.jsonl (same scripted session,
    both geometry modes; drives the reconstruction-fidelity test)
  - commands.json                               (canonical command encodings;
    drives the control-panel conformance test)
  - geometry_coefficients.bin / geometry_vertices.bin + geometry_expected.json
    (binary frame decoder fixtures)

Usage: python scripts/make_ui_fixtures.py [fixtures_dir]
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from facemirror.cli import run_replay
from facemirror.config import ServiceConfig
from facemirror.model import generate_bespoke_model, generate_synthetic_model, save_model
from facemirror.protocol import MODE_COEFFICIENTS, MODE_VERTICES, canonical, encode_geometry_frame
from facemirror.streams import synthetic_stream, write_landmark_jsonl

# every control in the panel maps to exactly one wire command
CONTROL_COMMANDS = {
    "connect": {"cmd": "hello", "version": 1, "mode": "coefficients"},
    "connect_vertices": {"cmd": "hello", "version": 1, "mode": "vertices"},
    "calibrate": {"cmd": "begin_calibration"},
    "finish_calibration": {"cmd": "end_calibration"},
    "pick_female_africa": {"cmd": "set_transform", "tag": "female-africa"},
    "pick_male_asia_custom": {"cmd": "set_transform", "tag": "male-asia",
                              "box_scale": 2.5, "period": 600},
    "clear_transform": {"cmd": "clear_transform"},
    "hold_on": {"cmd": "set_morph_hold", "hold": True},
    "hold_off": {"cmd": "set_morph_hold", "hold": False},
    "join_collective_f": {"cmd": "assign_collective", "group": "F"},
    "join_collective_m": {"cmd": "assign_collective", "group": "M"},
    "refresh_status": {"cmd": "get_status"},
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("fixtures_dir", nargs="?", default="frontend/test/fixtures")
    args = parser.parse_args()
    out = Path(args.fixtures_dir)
    out.mkdir(parents=True, exist_ok=True)

    model = generate_synthetic_model(seed=21, n_vertices=300, n_id=8, n_expr=4,
                                     tag="global", n_color=2)
    bespoke = generate_bespoke_model(model, seed=22, tag="female-africa", n_id=6)
    save_model(model, out / "model_global.mod3dmm")
    (out / "model_summary.json").write_text(json.dumps({
        "n_vertices": model.n_vertices,
        "n_id": model.n_id,
        "n_expr": model.n_expr,
        "n_color": model.n_color,
        "tag": model.tag,
        "n_triangles": int(model.topology.shape[0]),
        "mean_shape_head": [float(v) for v in model.mean_shape[:6]],
        "identity_sigma": [float(v) for v in model.identity_sigma],
        "landmark_vertices_head": [int(v) for v in model.landmark_vertices[:8]],
    }, indent=2) + "\n")

    (out / "commands.json").write_text(json.dumps(
        {name: canonical(cmd) for name, cmd in CONTROL_COMMANDS.items()},
        indent=2, sort_keys=True) + "\n")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        model_dir = tmp / "models"
        model_dir.mkdir()
        save_model(model, model_dir / "global.mod3dmm")
        save_model(bespoke, model_dir / "female-africa.mod3dmm")
        frames, _ = synthetic_stream(model, 12, seed=23)
        stream = tmp / "landmarks.jsonl"
        write_landmark_jsonl(frames, stream)
        script = tmp / "script.jsonl"
        script.write_text("".join(json.dumps(s) + "\n" for s in [
            {"frame": 0, "cmd": {"cmd": "begin_calibration"}},
            {"frame": 6, "cmd": {"cmd": "set_transform", "tag": "female-africa",
                                 "period": 40}},
        ]))
        config = ServiceConfig(calibration_frames=3, morph_period=40)
        run_replay(script, stream, model_dir, out / "replay_coefficients.jsonl",
                   mode="coefficients", config=config)
        run_replay(script, stream, model_dir, out / "replay_vertices.jsonl",
                   mode="vertices", config=config)

    rotation = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    common = dict(seq=7, timestamp_ms=12_345, rmse=0.25, morph_p=0.75, morph_hold=True,
                  rotation=rotation, scale=1.5, translation=np.array([4.0, -2.0]))
    identity = np.array([0.5, -1.25, 0.0])
    expression = np.array([2.0, -0.5])
    vertices = np.array([1.0, 2.0, 3.0, -4.0, 5.5, -6.25])
    (out / "geometry_coefficients.bin").write_bytes(encode_geometry_frame(
        mode=MODE_COEFFICIENTS, identity=identity, expression=expression,
        vertices=None, **common))
    (out / "geometry_vertices.bin").write_bytes(encode_geometry_frame(
        mode=MODE_VERTICES, identity=identity, expression=expression,
        vertices=vertices, **common))
    (out / "geometry_expected.json").write_text(json.dumps({
        "seq": 7, "t_ms": 12345, "rmse": 0.25, "morph_p": 0.75, "morph_hold": True,
        "transform_active": True, "scale": 1.5, "translation": [4.0, -2.0],
        "rotation": [float(v) for v in rotation.reshape(-1)],
        "identity": [float(v) for v in identity],
        "expression": [float(v) for v in expression],
        "vertices": [float(v) for v in vertices],
    }, indent=2) + "\n")

    print(f"fixtures written to {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
