/**
 * Browser entry: wires the socket client, the control panel, the landmark
 * stream feeder, and the mesh view together. Landmark detection is external;
 * the feeder replays a recorded JSONL stream at the server's frame rate.
 */

import { connectAndNegotiate, fetchModel, MirrorClient } from "./client.js";
import type { ClientModel } from "./container.js";
import {
  calibrateCommand,
  clearTransformCommand,
  joinCollectiveCommand,
  setMorphHoldCommand,
  setTransformCommand,
  statusCommand,
  type LandmarkRecord,
} from "./controls.js";
import type { GeometryMode } from "./protocol.js";
import { reconstructShape } from "./reconstruct.js";
import { MirrorView } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let client: MirrorClient | null = null;
let model: ClientModel | null = null;
let view: MirrorView | null = null;
let stream: LandmarkRecord[] = [];
let feeder: number | null = null;
let frameRate = 60;
let phase = "disconnected";
let joined = new Set<string>();
let framesShown = 0;
let lastFpsStamp = performance.now();

function setStatus(text: string): void {
  $("status").textContent = text;
}

function setBanner(text: string, isError = false): void {
  const banner = $("banner");
  banner.textContent = text;
  banner.className = isError ? "banner error" : "banner";
  banner.style.display = text ? "block" : "none";
}

function refreshOverlay(extra: Record<string, string> = {}): void {
  const parts = [`phase: ${phase}`];
  for (const [key, value] of Object.entries(extra)) parts.push(`${key}: ${value}`);
  $("overlay").textContent = parts.join("   ");
}

async function connect(): Promise<void> {
  const base = ($("server") as HTMLInputElement).value.replace(/\/$/, "");
  const mode = ($("mode") as HTMLSelectElement).value as GeometryMode;
  const wsUrl = base.replace(/^http/, "ws") + "/ws";
  setBanner("");
  try {
    client = await connectAndNegotiate(wsUrl, mode);
  } catch (err) {
    setBanner(`connection failed: ${(err as Error).message}`, true);
    return;
  }
  const hello = client.hello!;
  phase = hello.phase;
  frameRate = hello.frame_rate || 60;
  setStatus(`session ${hello.session} (${hello.mode} mode)`);
  refreshOverlay();

  const picker = $("transform") as HTMLSelectElement;
  picker.innerHTML = "";
  for (const tag of hello.tags) {
    const option = document.createElement("option");
    option.value = tag;
    option.textContent = tag;
    picker.appendChild(option);
  }

  model = await fetchModel(base, hello.model.tag);
  view = new MirrorView($("canvas") as HTMLCanvasElement);
  view.setModel(model);

  client.onEvent((event) => {
    if (event.event === "calibrated") phase = "live";
    if (event.event === "calibration_progress") {
      refreshOverlay({ calibration: `${event.collected}/${event.needed}` });
      return;
    }
    if (event.err) setBanner(`${event.err}: ${event.detail ?? ""}`, true);
    refreshOverlay();
  });

  client.onFrame(() => {
    /* mailbox consumer runs in the render loop */
  });

  const loop = () => {
    if (!client) return;
    if (!client.connected) {
      // freeze-frame: keep the last rendered mesh, offer reconnect
      setBanner("connection lost - last frame held, press connect to retry", true);
      stopFeeder();
      return;
    }
    const frame = client.takeLatestFrame();
    if (frame && view) {
      view.showFrame(frame);
      framesShown += 1;
      const now = performance.now();
      if (now - lastFpsStamp > 500) {
        const fps = (framesShown * 1000) / (now - lastFpsStamp);
        framesShown = 0;
        lastFpsStamp = now;
        refreshOverlay({
          rmse: frame.rmse.toFixed(3),
          p: frame.morphP === null ? "-" : frame.morphP.toFixed(3),
          fps: fps.toFixed(0),
        });
      }
    }
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

async function sendChecked(cmd: ReturnType<typeof statusCommand>): Promise<void> {
  if (!client) {
    setBanner("not connected", true);
    return;
  }
  const reply = await client.send(cmd);
  if (reply.err) {
    setBanner(`${reply.err}: ${reply.detail ?? ""}`, true);
  } else {
    setBanner("");
    phase = (reply.phase as string) ?? phase;
    refreshOverlay();
  }
}

function startFeeder(): void {
  if (!client || !stream.length) {
    setBanner("load a landmark stream first", true);
    return;
  }
  stopFeeder();
  let index = 0;
  feeder = window.setInterval(() => {
    if (!client || index >= stream.length) {
      stopFeeder();
      return;
    }
    client.sendFrame(stream[index++]);
  }, 1000 / frameRate);
}

function stopFeeder(): void {
  if (feeder !== null) {
    clearInterval(feeder);
    feeder = null;
  }
}

async function showCollective(group: "F" | "M"): Promise<void> {
  const base = ($("server") as HTMLInputElement).value.replace(/\/$/, "");
  const response = await fetch(`${base}/collective/${group}`);
  if (!response.ok) {
    setBanner(`no collective state for ${group}`, true);
    return;
  }
  const state = (await response.json()) as { count: number; mean_identity: number[] | null };
  if (!state.mean_identity || !model || !view) {
    setBanner(`collective ${group} is empty`, true);
    return;
  }
  const shape = reconstructShape(model, state.mean_identity, new Array(model.nExpr).fill(0));
  view.showStaticShape(shape);
  setBanner(`collective ${group}: ${state.count} contribution(s)`);
}

function wire(): void {
  $("connect").onclick = () => void connect();
  $("calibrate").onclick = () => void sendChecked(calibrateCommand());
  $("apply-transform").onclick = () => {
    const tag = ($("transform") as HTMLSelectElement).value;
    const period = parseInt(($("period") as HTMLInputElement).value, 10) || undefined;
    void sendChecked(setTransformCommand(tag, undefined, period));
  };
  $("clear-transform").onclick = () => void sendChecked(clearTransformCommand());
  ($("hold") as HTMLInputElement).onchange = (event) => {
    void sendChecked(setMorphHoldCommand((event.target as HTMLInputElement).checked));
  };
  for (const group of ["F", "M"] as const) {
    $(`join-${group}`).onclick = async () => {
      if (joined.has(group)) return;            // one contribution per session
      await sendChecked(joinCollectiveCommand(group));
      joined.add(group);
      ($(`join-${group}`) as HTMLButtonElement).disabled = true;
    };
    $(`view-${group}`).onclick = () => void showCollective(group);
  }
  $("status-btn").onclick = async () => {
    if (!client) return;
    const reply = await client.send(statusCommand());
    setBanner(JSON.stringify(reply));
  };
  ($("stream-file") as HTMLInputElement).onchange = async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const text = await file.text();
    stream = text
      .split("\n")
      .filter((line) => line.trim())
      .map((line) => JSON.parse(line) as LandmarkRecord);
    setBanner(`${stream.length} frames loaded`);
  };
  $("play").onclick = () => startFeeder();
  $("stop").onclick = () => stopFeeder();
}

wire();
refreshOverlay();
