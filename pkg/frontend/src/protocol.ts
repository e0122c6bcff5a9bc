/**
 * Wire protocol v1, client side: canonical JSON text messages and the binary
 * geometry frame decoder. Byte layout reference: ../protocol.md at the
 * repository root. All multi-byte fields after the magic are little-endian.
 */

export const PROTOCOL_VERSION = 1;

export type GeometryMode = "coefficients" | "vertices";

export interface Command {
  cmd: string;
  [key: string]: unknown;
}

export interface ServerText {
  ack?: string;
  err?: string;
  event?: string;
  [key: string]: unknown;
}

/** Canonical encoding: keys sorted lexicographically, compact separators. */
export function encodeCommand(command: Command): string {
  return canonicalJson(command);
}

function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const entries = Object.keys(value as Record<string, unknown>)
    .sort()
    .map((key) => JSON.stringify(key) + ":" + canonicalJson((value as Record<string, unknown>)[key]));
  return "{" + entries.join(",") + "}";
}

const MAGIC = 0x4d4f4446; // the ASCII bytes "MODF" read big-endian

export const MODE_COEFFICIENTS = 0;
export const MODE_VERTICES = 1;
const FLAG_TRANSFORM_ACTIVE = 0x01;
const FLAG_MORPH_HOLD = 0x02;

export interface GeometryFrame {
  seq: number;
  mode: number;
  transformActive: boolean;
  morphHold: boolean;
  tMs: number;
  rmse: number;
  /** null when no transform is active */
  morphP: number | null;
  /** row-major 3x3 rotation */
  rotation: Float32Array;
  scale: number;
  translation: [number, number];
  identity?: Float32Array;
  expression?: Float32Array;
  vertices?: Float32Array;
}

export function decodeGeometryFrame(buffer: ArrayBuffer): GeometryFrame {
  const view = new DataView(buffer);
  if (view.getUint32(0, false) !== MAGIC) {
    throw new Error("bad geometry frame magic");
  }
  const seq = view.getUint32(4, true);
  const mode = view.getUint8(8);
  const flags = view.getUint8(9);
  const tMs = Number(view.getBigUint64(12, true));
  const rmse = view.getFloat32(20, true);
  const rawP = view.getFloat32(24, true);
  const rotation = new Float32Array(9);
  for (let i = 0; i < 9; i++) rotation[i] = view.getFloat32(28 + 4 * i, true);
  const scale = view.getFloat32(64, true);
  const translation: [number, number] = [view.getFloat32(68, true), view.getFloat32(72, true)];

  const frame: GeometryFrame = {
    seq,
    mode,
    transformActive: (flags & FLAG_TRANSFORM_ACTIVE) !== 0,
    morphHold: (flags & FLAG_MORPH_HOLD) !== 0,
    tMs,
    rmse,
    morphP: (flags & FLAG_TRANSFORM_ACTIVE) !== 0 ? rawP : null,
    rotation,
    scale,
    translation,
  };

  let offset = 76;
  if (mode === MODE_COEFFICIENTS) {
    const nId = view.getUint16(offset, true);
    const nExpr = view.getUint16(offset + 2, true);
    offset += 4;
    frame.identity = readF32(buffer, offset, nId);
    offset += 4 * nId;
    frame.expression = readF32(buffer, offset, nExpr);
  } else if (mode === MODE_VERTICES) {
    const nVertices = view.getUint32(offset, true);
    offset += 4;
    frame.vertices = readF32(buffer, offset, 3 * nVertices);
  } else {
    throw new Error(`unknown geometry mode ${mode}`);
  }
  return frame;
}

function readF32(buffer: ArrayBuffer, offset: number, count: number): Float32Array {
  // offsets in the payload are not guaranteed 4-aligned; copy via DataView
  const view = new DataView(buffer, offset, 4 * count);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(4 * i, true);
  return out;
}
