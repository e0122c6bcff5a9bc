import json
from pathlib import Path

import numpy as np
import pytest

from facemirror.cli import main
from facemirror.model import load_model, save_model
from facemirror.streams import synthetic_stream, write_landmark_jsonl
from facemirror.transform import morph_factor


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, small_model, bespoke_model):
    d = tmp_path_factory.mktemp("models")
    save_model(small_model, d / "global.mod3dmm")
    save_model(bespoke_model, d / "female-africa.mod3dmm")
    return d


def write_stream(small_model, path, n_frames, seed=3):
    frames, identity = synthetic_stream(small_model, n_frames, seed=seed)
    write_landmark_jsonl(frames, path)
    return identity


# --- genmodel ---

def test_genmodel_writes_loadable_container(tmp_path):
    out = tmp_path / "m.mod3dmm"
    assert main(["genmodel", "--seed", "3", "--n-vertices", "120",
                 "--n-id", "4", "--n-expr", "2", str(out)]) == 0
    model = load_model(out)
    assert model.n_id == 4 and model.n_expr == 2


def test_genmodel_same_seed_identical_files(tmp_path):
    a, b = tmp_path / "a.mod3dmm", tmp_path / "b.mod3dmm"
    args = ["genmodel", "--seed", "9", "--n-vertices", "100", "--n-id", "3", "--n-expr", "0"]
    assert main(args + [str(a)]) == 0
    assert main(args + [str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_genmodel_too_many_components(tmp_path, capsys):
    out = tmp_path / "m.mod3dmm"
    code = main(["genmodel", "--n-vertices", "80", "--n-id", "240", str(out)])
    assert code == 1
    assert "TooManyComponents" in capsys.readouterr().err


def test_genmodel_bespoke_derivation(tmp_path):
    base = tmp_path / "global.mod3dmm"
    assert main(["genmodel", "--seed", "2", "--n-vertices", "90", "--n-id", "6",
                 "--n-expr", "2", str(base)]) == 0
    out = tmp_path / "target.mod3dmm"
    assert main(["genmodel", "--from-global", str(base), "--tag", "male-asia",
                 "--seed", "5", "--n-id", "4", str(out)]) == 0
    derived = load_model(out)
    assert derived.tag == "male-asia" and derived.n_id == 4


# --- fit ---

def test_fit_roundtrip_trace_rmse(model_dir, small_model, tmp_path):
    stream = tmp_path / "landmarks.jsonl"
    write_stream(small_model, stream, 28)
    out_dir = tmp_path / "out"
    code = main(["fit", str(model_dir), str(stream),
                 "--calibration-frames", "3", "--ridge", "0",
                 "--smoothing-window", "1", "--refine-iterations", "12",
                 "--export-every", "10", "--out-dir", str(out_dir)])
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "trace.jsonl").read_text().splitlines()]
    assert len(rows) == 25
    assert all(r["output"]["rmse"] < 1e-6 for r in rows)
    meshes = sorted(out_dir.glob("mesh_*.obj"))
    assert [m.name for m in meshes] == ["mesh_000000.obj", "mesh_000010.obj", "mesh_000020.obj"]


def test_fit_trace_morph_factor(model_dir, small_model, tmp_path):
    stream = tmp_path / "landmarks.jsonl"
    write_stream(small_model, stream, 9)
    out_dir = tmp_path / "out"
    code = main(["fit", str(model_dir), str(stream),
                 "--calibration-frames", "3", "--transform", "female-africa",
                 "--morph-period", "48", "--out-dir", str(out_dir)])
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "trace.jsonl").read_text().splitlines()]
    assert len(rows) == 6
    for i, row in enumerate(rows):
        assert row["output"]["morph_p"] == morph_factor(i + 1, 48)
        assert row["output"]["transform"] == "female-africa"


def test_fit_unknown_transform_tag(model_dir, small_model, tmp_path, capsys):
    stream = tmp_path / "landmarks.jsonl"
    write_stream(small_model, stream, 5)
    code = main(["fit", str(model_dir), str(stream), "--calibration-frames", "2",
                 "--transform", "martian", "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "UnknownModelTag" in capsys.readouterr().err


# --- replay ---

def replay_args(model_dir, tmp_path, small_model, script_lines, n_frames=8, mode="vertices"):
    stream = tmp_path / "landmarks.jsonl"
    write_stream(small_model, stream, n_frames)
    script = tmp_path / "script.jsonl"
    script.write_text("".join(json.dumps(s) + "\n" for s in script_lines))
    out = tmp_path / "replay.jsonl"
    return ["replay", str(script), str(stream), str(model_dir), str(out),
            "--mode", mode, "--calibration-frames", "3"], out


def test_replay_is_deterministic(model_dir, small_model, tmp_path):
    script = [
        {"frame": 0, "cmd": {"cmd": "begin_calibration"}},
        {"frame": 4, "cmd": {"cmd": "set_transform", "tag": "female-africa", "period": 32}},
        {"frame": 6, "cmd": {"cmd": "assign_collective", "group": "F"}},
    ]
    args, out = replay_args(model_dir, tmp_path, small_model, script)
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
    lines = [json.loads(l) for l in first.decode().splitlines()]
    assert any("output" in l for l in lines)
    assert any(l.get("ack") == "assign_collective" for l in lines)


def test_replay_empty_script_yields_only_events(model_dir, small_model, tmp_path):
    args, out = replay_args(model_dir, tmp_path, small_model, [], n_frames=3)
    assert main(args) == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(lines) == 3
    assert all(l.get("event") == "frame_ignored" for l in lines)


def test_replay_wrong_phase_command_recorded(model_dir, small_model, tmp_path):
    script = [{"frame": 0, "cmd": {"cmd": "set_transform", "tag": "female-africa"}},
              {"frame": 1, "cmd": {"cmd": "begin_calibration"}}]
    args, out = replay_args(model_dir, tmp_path, small_model, script, n_frames=5)
    assert main(args) == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert lines[0] == {"cmd": "set_transform", "detail": lines[0]["detail"],
                        "err": "InvalidPhase"}
    assert any(l.get("ack") == "begin_calibration" for l in lines)
    assert any("output" in l for l in lines)


# --- bench ---

def test_bench_tiny_model_reports_fps(capsys):
    code = main(["bench", "--n-vertices", "500", "--n-id", "10", "--n-expr", "5",
                 "--frames", "30", "--calibration-frames", "3"])
    assert code == 0
    text = capsys.readouterr().out
    assert "frames per second" in text
    fps = float(text.split("aggregate:")[1].split("FPS")[0].split(",")[-1])
    assert fps > 60.0


def test_bench_rejects_zero_frames(capsys):
    assert main(["bench", "--frames", "0"]) == 2
    assert "at least one frame" in capsys.readouterr().err


def test_bench_repetitions(capsys, tmp_path):
    report = tmp_path / "bench.json"
    code = main(["bench", "--n-vertices", "200", "--n-id", "4", "--n-expr", "2",
                 "--frames", "10", "--calibration-frames", "2",
                 "--repetitions", "3", "--json", str(report)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("repetition") == 3
    data = json.loads(report.read_text())
    assert data["repetitions"] == 3 and data["fps"] > 0
