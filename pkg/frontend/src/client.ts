/**
 * Session client: one duplex socket, request/ack pairing for commands, a
 * latest-frame mailbox for geometry. The socket reader never blocks the
 * render loop; rendering polls the mailbox at display refresh.
 */

import { parseModelContainer, type ClientModel } from "./container.js";
import { frameCommand, helloCommand, type LandmarkRecord } from "./controls.js";
import {
  decodeGeometryFrame,
  encodeCommand,
  type Command,
  type GeometryFrame,
  type GeometryMode,
  type ServerText,
} from "./protocol.js";

/** The subset of WebSocket the client uses; injectable for tests. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string | ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((event: unknown) => void) | null;
}

export interface HelloAck extends ServerText {
  ack: "hello";
  session: string;
  mode: GeometryMode;
  phase: string;
  model: { tag: string; n_vertices: number; n_id: number; n_expr: number };
  tags: string[];
  frame_rate: number;
  mirror_display: boolean;
}

export type EventHandler = (event: ServerText) => void;
export type FrameHandler = (frame: GeometryFrame) => void;

export class MirrorClient {
  private socket: SocketLike | null = null;
  private pending: Array<(reply: ServerText) => void> = [];
  private eventHandlers: EventHandler[] = [];
  private frameHandlers: FrameHandler[] = [];
  private latest: GeometryFrame | null = null;
  hello: HelloAck | null = null;
  connected = false;

  onEvent(handler: EventHandler): void {
    this.eventHandlers.push(handler);
  }

  onFrame(handler: FrameHandler): void {
    this.frameHandlers.push(handler);
  }

  /** Most recent geometry frame, consuming it (render the latest, drop stale). */
  takeLatestFrame(): GeometryFrame | null {
    const frame = this.latest;
    this.latest = null;
    return frame;
  }

  attach(socket: SocketLike): void {
    this.socket = socket;
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onclose = () => {
      this.connected = false;
      this.failPending("connection closed");
    };
    socket.onerror = () => {
      this.connected = false;
      this.failPending("socket error");
    };
  }

  /** Handshake; resolves with the hello ack or rejects on mismatch. */
  async negotiate(mode: GeometryMode): Promise<HelloAck> {
    const reply = await this.send(helloCommand(mode));
    if (reply.err) {
      throw new Error(`handshake failed: ${reply.err}: ${reply.detail ?? ""}`);
    }
    this.hello = reply as HelloAck;
    this.connected = true;
    return this.hello;
  }

  /** Send a command; resolves with its ack or err (one reply per command). */
  send(command: Command): Promise<ServerText> {
    const socket = this.socket;
    if (!socket) return Promise.reject(new Error("not attached"));
    return new Promise((resolve) => {
      this.pending.push(resolve);
      socket.send(encodeCommand(command));
    });
  }

  /** Landmark frames produce events/geometry rather than acks. */
  sendFrame(record: LandmarkRecord): void {
    if (!this.socket) throw new Error("not attached");
    this.socket.send(encodeCommand(frameCommand(record)));
  }

  close(): void {
    this.socket?.close();
    this.connected = false;
  }

  private handleMessage(data: string | ArrayBuffer): void {
    if (typeof data !== "string") {
      const frame = decodeGeometryFrame(data);
      this.latest = frame;
      for (const handler of this.frameHandlers) handler(frame);
      return;
    }
    const message = JSON.parse(data) as ServerText;
    if (message.ack !== undefined || message.err !== undefined) {
      const resolve = this.pending.shift();
      if (resolve) resolve(message);
      else for (const handler of this.eventHandlers) handler(message);
      return;
    }
    for (const handler of this.eventHandlers) handler(message);
  }

  private failPending(reason: string): void {
    const waiting = this.pending;
    this.pending = [];
    for (const resolve of waiting) resolve({ err: "ConnectionLost", detail: reason });
  }
}

/** Browser helper: open a WebSocket and run the handshake. */
export async function connectAndNegotiate(url: string, mode: GeometryMode): Promise<MirrorClient> {
  const socket = new WebSocket(url);
  socket.binaryType = "arraybuffer";
  await new Promise<void>((resolve, reject) => {
    socket.onopen = () => resolve();
    socket.onerror = () => reject(new Error(`cannot reach ${url}`));
  });
  const client = new MirrorClient();
  client.attach(socket as unknown as SocketLike);
  await client.negotiate(mode);
  return client;
}

/** Download and parse the model container for client-side reconstruction. */
export async function fetchModel(baseUrl: string, tag: string): Promise<ClientModel> {
  const response = await fetch(`${baseUrl}/model/${tag}`);
  if (!response.ok) throw new Error(`model download failed: HTTP ${response.status}`);
  return parseModelContainer(await response.arrayBuffer());
}
