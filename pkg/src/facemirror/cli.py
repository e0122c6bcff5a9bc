"""Command-line entry points: model generation, offline fitting, benchmarks,
deterministic service replay, and the network server."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .collective import CollectiveState
from .config import ServiceConfig, load_config
from .errors import FaceMirrorError
from .fitting import estimate_pose, estimate_shape, coordinate_rows
from .landmarks import parse_landmark_stream
from .model import generate_bespoke_model, generate_synthetic_model, load_model, save_model
from .protocol import canonical, parse_command
from .render import assemble_mesh, write_mesh
from .service import FrameOutput, MirrorSession, ModelRegistry, load_registry
from .streams import synthetic_stream
from .transform import advance_morph


def _pose_json(pose) -> dict:
    return {
        "rotation": [float(v) for v in pose.rotation.reshape(-1)],
        "scale": float(pose.scale),
        "tx": float(pose.translation[0]),
        "ty": float(pose.translation[1]),
    }


def output_json(out: FrameOutput, include_vertices: bool = True) -> dict:
    body = {
        "seq": out.seq,
        "t": out.timestamp_ms,
        "pose": _pose_json(out.pose),
        "identity": [float(v) for v in out.identity],
        "expression": [float(v) for v in out.expression],
        "morph_p": out.morph_p,
        "rmse": out.rmse,
        "transform": out.transform_tag,
    }
    if include_vertices:
        body["vertices"] = None if out.vertices is None else [float(v) for v in out.vertices]
    return {"output": body}


def cmd_genmodel(args) -> int:
    if args.from_global:
        base = load_model(args.from_global)
        model = generate_bespoke_model(base, seed=args.seed, tag=args.tag,
                                       n_id=args.n_id if args.n_id else None)
    else:
        model = generate_synthetic_model(
            seed=args.seed, n_vertices=args.n_vertices, n_id=args.n_id,
            n_expr=args.n_expr, tag=args.tag, n_color=args.n_color,
        )
    save_model(model, args.out)
    print(f"wrote {args.out} (tag={model.tag}, N={model.n_vertices}, "
          f"n_id={model.n_id}, n_expr={model.n_expr}, n_color={model.n_color})")
    return 0


def _session_config(args) -> ServiceConfig:
    config = ServiceConfig()
    for name in ("calibration_frames", "box_k", "ridge", "smoothing_window",
                 "refine_iterations", "morph_period", "morph_box_scale"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    return config


def cmd_fit(args) -> int:
    registry = load_registry(args.model_dir)
    config = _session_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    collective = CollectiveState(n_id=registry.global_model.n_id)
    session = MirrorSession(registry, config, collective,
                            geometry_mode="vertices", record_latency=False)
    session.handle_command({"cmd": "begin_calibration"})

    live_index = 0
    exported = 0
    with open(args.landmarks, encoding="utf-8") as reader, \
            open(out_dir / "trace.jsonl", "w", encoding="utf-8") as trace:
        for frame in parse_landmark_stream(reader):
            messages = session.process_frame(frame)
            for msg in messages:
                if isinstance(msg, FrameOutput):
                    trace.write(canonical(output_json(msg, include_vertices=False)) + "\n")
                    if args.export_every and live_index % args.export_every == 0:
                        mesh = assemble_mesh(msg.vertices, registry.global_model)
                        write_mesh(mesh, out_dir / f"mesh_{live_index:06d}.obj", "OBJ")
                        exported += 1
                    live_index += 1
                elif msg.get("event") == "calibrated" and args.transform:
                    ack = session.handle_command({
                        "cmd": "set_transform", "tag": args.transform,
                        "box_scale": config.morph_box_scale, "period": config.morph_period,
                    })
                    if "err" in ack:
                        print(f"error: {ack['err']}: {ack['detail']}", file=sys.stderr)
                        return 1
                elif msg.get("event") == "frame_error":
                    print(f"error: {msg['kind']}: {msg['detail']}", file=sys.stderr)
                    return 1
    print(f"fit {live_index} live frames; trace at {out_dir / 'trace.jsonl'}; "
          f"{exported} meshes exported")
    return 0


def _percentile(values, q):
    return float(np.percentile(np.asarray(values), q)) if values else float("nan")


def cmd_bench(args) -> int:
    if args.frames < 1:
        print("error: need at least one frame to benchmark", file=sys.stderr)
        return 2
    print(f"generating synthetic model: N={args.n_vertices}, n_id={args.n_id}, "
          f"n_expr={args.n_expr} ...")
    model = generate_synthetic_model(seed=args.seed, n_vertices=args.n_vertices,
                                     n_id=args.n_id, n_expr=args.n_expr, tag="global")
    bespoke = generate_bespoke_model(model, seed=args.seed + 1, tag="bench-target")
    frames, _ = synthetic_stream(model, args.frames + args.calibration_frames, seed=args.seed)

    registry = ModelRegistry(global_model=model, bespoke={bespoke.tag: bespoke}, containers={})
    aggregate = []
    for rep in range(args.repetitions):
        config = _session_config(args)
        config.calibration_frames = args.calibration_frames
        collective = CollectiveState(n_id=model.n_id)
        session = MirrorSession(registry, config, collective,
                                geometry_mode="vertices", record_latency=True)
        session.handle_command({"cmd": "begin_calibration"})
        for frame in frames[:args.calibration_frames]:
            session.process_frame(frame)
        session.handle_command({"cmd": "set_transform", "tag": "bench-target"})

        stage_times = {"pose": [], "shape": [], "transform": [], "assemble": [], "total": []}
        rows = coordinate_rows(model.landmark_vertices)
        neutral_r = session.neutral_shape[rows].reshape(-1, 3)
        for frame in frames[args.calibration_frames:]:
            t0 = time.perf_counter()
            pose = estimate_pose(frame, neutral_r)
            t1 = time.perf_counter()
            fit = estimate_shape(frame, pose, model, session.fit_config,
                                 mode="expression", fixed_identity=session.identity)
            t2 = time.perf_counter()
            morph, blended = advance_morph(session.morph, session.transform)
            geometry = blended + model.expression_basis @ fit.expression
            t3 = time.perf_counter()
            assemble_mesh(geometry, model)
            t4 = time.perf_counter()
            outputs = session.process_frame(frame)
            stage_times["pose"].append((t1 - t0) * 1000)
            stage_times["shape"].append((t2 - t1) * 1000)
            stage_times["transform"].append((t3 - t2) * 1000)
            stage_times["assemble"].append((t4 - t3) * 1000)
            total = [m.latency_ms for m in outputs if isinstance(m, FrameOutput)]
            if total:
                stage_times["total"].append(total[0])

        medians = {k: _percentile(v, 50) for k, v in stage_times.items()}
        p95s = {k: _percentile(v, 95) for k, v in stage_times.items()}
        fps = 1000.0 / medians["total"] if medians["total"] > 0 else float("inf")
        aggregate.append((medians, p95s, fps))
        print(f"\nrepetition {rep + 1}/{args.repetitions} "
              f"({args.frames} live frames, full pipeline with transform):")
        print(f"  {'stage':<10} {'median ms':>10} {'p95 ms':>10}")
        for k in ("pose", "shape", "transform", "assemble", "total"):
            print(f"  {k:<10} {medians[k]:>10.3f} {p95s[k]:>10.3f}")
        print(f"  frames per second (median total): {fps:.1f}")

    med_total = float(np.median([a[0]["total"] for a in aggregate]))
    p95_total = float(np.median([a[1]["total"] for a in aggregate]))
    fps = 1000.0 / med_total
    print(f"\naggregate: median {med_total:.3f} ms, p95 {p95_total:.3f} ms, "
          f"{fps:.1f} FPS (budget 16.6 ms for 60 FPS)")
    if args.json:
        report = {"median_ms": med_total, "p95_ms": p95_total, "fps": fps,
                  "n_vertices": args.n_vertices, "n_id": args.n_id, "n_expr": args.n_expr,
                  "frames": args.frames, "repetitions": args.repetitions}
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return 0


def run_replay(script_path, landmarks_path, model_dir, out_path, mode="vertices",
               config: ServiceConfig | None = None) -> None:
    """Deterministic in-process replay of a command script against a stream."""
    registry = load_registry(model_dir)
    config = config if config is not None else ServiceConfig()
    commands_by_frame: dict[int, list[dict]] = {}
    mode_from_script = None
    with open(script_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            cmd = parse_command(canonical(entry["cmd"]))
            if cmd["cmd"] == "hello":
                mode_from_script = cmd.get("mode", mode)
                continue
            commands_by_frame.setdefault(int(entry.get("frame", 0)), []).append(cmd)

    collective = CollectiveState(n_id=registry.global_model.n_id)
    session = MirrorSession(registry, config, collective, session_id="replay",
                            geometry_mode=mode_from_script or mode, record_latency=False)

    def emit(fh, message):
        if isinstance(message, FrameOutput):
            fh.write(canonical(output_json(message)) + "\n")
        else:
            fh.write(canonical(message) + "\n")

    with open(landmarks_path, encoding="utf-8") as reader, \
            open(out_path, "w", encoding="utf-8") as out:
        index = 0
        for frame in parse_landmark_stream(reader):
            for cmd in commands_by_frame.pop(index, []):
                emit(out, session.handle_command(cmd))
            for message in session.process_frame(frame):
                emit(out, message)
            index += 1
        for frame_index in sorted(commands_by_frame):
            for cmd in commands_by_frame[frame_index]:
                emit(out, session.handle_command(cmd))


def cmd_replay(args) -> int:
    run_replay(args.script, args.landmarks, args.model_dir, args.out, mode=args.mode,
               config=_session_config(args))
    print(f"replayed to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import run_server

    config = load_config(args.config) if args.config else load_config()
    if args.model_dir:
        config.model_dir = args.model_dir
    if args.host:
        config.listen_host = args.host
    if args.port:
        config.listen_port = args.port
    run_server(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mod", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genmodel", help="generate a synthetic model container")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n-vertices", type=int, default=500)
    p.add_argument("--n-id", type=int, default=10)
    p.add_argument("--n-expr", type=int, default=5)
    p.add_argument("--n-color", type=int, default=0)
    p.add_argument("--tag", default="global")
    p.add_argument("--from-global", metavar="PATH",
                   help="derive a demographic target model from this global container")
    p.add_argument("out")
    p.set_defaults(func=cmd_genmodel)

    p = sub.add_parser("fit", help="offline fit of a recorded landmark stream")
    p.add_argument("model_dir")
    p.add_argument("landmarks")
    p.add_argument("--calibration-frames", type=int, default=None)
    p.add_argument("--transform", metavar="TAG")
    p.add_argument("--box-k", type=float, default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--smoothing-window", type=int, default=None)
    p.add_argument("--refine-iterations", type=int, default=None)
    p.add_argument("--morph-period", type=int, default=None)
    p.add_argument("--morph-box-scale", type=float, default=None)
    p.add_argument("--out-dir", default="fit_out")
    p.add_argument("--export-every", type=int, default=0, metavar="K",
                   help="write an OBJ mesh every K live frames")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="time the per-frame pipeline")
    p.add_argument("--n-vertices", type=int, default=30_000)
    p.add_argument("--n-id", type=int, default=158)
    p.add_argument("--n-expr", type=int, default=29)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--calibration-frames", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--json", metavar="PATH", help="also write a JSON report")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="deterministic in-process service replay")
    p.add_argument("script")
    p.add_argument("landmarks")
    p.add_argument("model_dir")
    p.add_argument("out")
    p.add_argument("--mode", choices=("coefficients", "vertices"), default="vertices")
    p.add_argument("--calibration-frames", type=int, default=None)
    p.add_argument("--box-k", type=float, default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--smoothing-window", type=int, default=None)
    p.add_argument("--refine-iterations", type=int, default=None)
    p.add_argument("--morph-period", type=int, default=None)
    p.add_argument("--morph-box-scale", type=float, default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the streaming mirror server")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--model-dir")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FaceMirrorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
