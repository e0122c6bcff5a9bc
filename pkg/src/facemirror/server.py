"""Network layer: WebSocket sessions plus static model download over HTTP.

One WebSocket connection is one mirror session. Text frames carry JSON
commands and acks/events; geometry flows server-to-client as binary frames.
Sessions share the collective state and the immutable model registry.
"""

from __future__ import annotations

import json
import uuid
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, Response

from .collective import CollectiveState
from .config import ServiceConfig
from .errors import BindFailure, UnknownCommand
from .landmarks import LandmarkFrame
from .protocol import (
    MODE_NAMES,
    PROTOCOL_VERSION,
    canonical,
    encode_geometry_frame,
    parse_command,
)
from .service import FrameOutput, MirrorSession, export_all_collectives, load_registry

FRONTEND_DIR = Path(__file__).resolve().parents[2] / "frontend"


def _frame_from_command(cmd: dict) -> LandmarkFrame:
    return LandmarkFrame(timestamp=int(cmd["t"]), points=cmd["pts"],
                         image_size=(int(cmd["w"]), int(cmd["h"])))


def create_app(registry, config: ServiceConfig, collective: CollectiveState) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        export_all_collectives(collective, registry.global_model, config.export_dir)

    app = FastAPI(title="facemirror", lifespan=lifespan)
    app.state.registry = registry
    app.state.collective = collective
    app.state.config = config

    @app.get("/models")
    def list_models():
        return {
            "version": PROTOCOL_VERSION,
            "global": registry.global_model.tag,
            "tags": registry.tags(),
        }

    @app.get("/model/{tag}")
    def model_container(tag: str):
        if tag not in registry.containers:
            return JSONResponse({"err": "UnknownModelTag", "detail": tag}, status_code=404)
        return Response(registry.containers[tag], media_type="application/octet-stream")

    @app.get("/collective/{group}")
    def collective_state(group: str):
        snapshot = collective.snapshot()
        if group not in snapshot:
            return JSONResponse({"err": "GroupUnknown", "detail": group}, status_code=404)
        return snapshot[group]

    @app.get("/")
    def index():
        page = FRONTEND_DIR / "index.html"
        if page.exists():
            return FileResponse(page)
        return JSONResponse({"service": "facemirror", "version": PROTOCOL_VERSION,
                             "websocket": "/ws"})

    if FRONTEND_DIR.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/app", StaticFiles(directory=FRONTEND_DIR, html=True), name="frontend")

    @app.websocket("/ws")
    async def mirror_socket(socket: WebSocket):
        await socket.accept()
        try:
            hello_raw = await socket.receive_text()
            hello = parse_command(hello_raw)
            if hello["cmd"] != "hello":
                await socket.send_text(canonical(
                    {"err": "UnknownCommand", "detail": "first message must be hello"}))
                await socket.close()
                return
            if int(hello.get("version", -1)) != PROTOCOL_VERSION:
                await socket.send_text(canonical(
                    {"err": "VersionMismatch",
                     "detail": f"server speaks protocol {PROTOCOL_VERSION}"}))
                await socket.close()
                return
            mode_name = str(hello.get("mode", "coefficients"))
            if mode_name not in MODE_NAMES:
                await socket.send_text(canonical(
                    {"err": "UnknownCommand", "detail": f"unknown mode {mode_name!r}"}))
                await socket.close()
                return
        except (UnknownCommand, json.JSONDecodeError) as exc:
            await socket.send_text(canonical({"err": "UnknownCommand", "detail": str(exc)}))
            await socket.close()
            return
        except WebSocketDisconnect:
            return

        session = MirrorSession(
            registry, config, collective,
            session_id=uuid.uuid4().hex[:12],
            geometry_mode=mode_name,
        )
        model = registry.global_model
        await socket.send_text(canonical({
            "ack": "hello",
            "version": PROTOCOL_VERSION,
            "session": session.session_id,
            "mode": mode_name,
            "phase": session.phase,
            "mirror_display": True,
            "model": {"tag": model.tag, "n_vertices": model.n_vertices,
                      "n_id": model.n_id, "n_expr": model.n_expr},
            "tags": registry.tags(),
            "frame_rate": config.frame_rate,
            "d_desired": config.d_desired,
        }))

        try:
            while True:
                raw = await socket.receive_text()
                try:
                    cmd = parse_command(raw)
                except UnknownCommand as exc:
                    await socket.send_text(canonical(
                        {"err": "UnknownCommand", "detail": str(exc)}))
                    continue
                if cmd["cmd"] == "frame":
                    try:
                        frame = _frame_from_command(cmd)
                    except Exception as exc:
                        await socket.send_text(canonical(
                            {"event": "frame_error", "kind": type(exc).__name__,
                             "detail": str(exc)}))
                        continue
                    for message in session.process_frame(frame):
                        if isinstance(message, FrameOutput):
                            await socket.send_bytes(encode_geometry_frame(
                                seq=message.seq,
                                mode=MODE_NAMES[mode_name],
                                timestamp_ms=message.timestamp_ms,
                                rmse=message.rmse,
                                morph_p=message.morph_p,
                                morph_hold=message.morph_hold,
                                rotation=message.pose.rotation,
                                scale=message.pose.scale,
                                translation=message.pose.translation,
                                identity=message.identity,
                                expression=message.expression,
                                vertices=message.vertices,
                            ))
                        else:
                            await socket.send_text(canonical(message))
                else:
                    await socket.send_text(canonical(session.handle_command(cmd)))
        except WebSocketDisconnect:
            return

    return app


def run_server(config: ServiceConfig) -> None:
    """Load models, then serve until interrupted. Flushes the collective on exit."""
    import uvicorn

    registry = load_registry(config.model_dir)
    collective = CollectiveState(n_id=registry.global_model.n_id)
    app = create_app(registry, config, collective)
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
    except OSError as exc:
        raise BindFailure(f"cannot bind {config.listen_host}:{config.listen_port}: {exc}") from exc
