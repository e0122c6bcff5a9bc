/**
 * Pure command builders: every control in the panel maps to exactly one
 * protocol command. The conformance test checks each builder's canonical
 * encoding byte-for-byte against the engine-generated fixtures.
 */

import { Command, GeometryMode, PROTOCOL_VERSION } from "./protocol.js";

export function helloCommand(mode: GeometryMode): Command {
  return { cmd: "hello", version: PROTOCOL_VERSION, mode };
}

export function calibrateCommand(): Command {
  return { cmd: "begin_calibration" };
}

export function finishCalibrationCommand(): Command {
  return { cmd: "end_calibration" };
}

export function setTransformCommand(tag: string, boxScale?: number, period?: number): Command {
  const command: Command = { cmd: "set_transform", tag };
  if (boxScale !== undefined) command.box_scale = boxScale;
  if (period !== undefined) command.period = period;
  return command;
}

export function clearTransformCommand(): Command {
  return { cmd: "clear_transform" };
}

export function setMorphHoldCommand(hold: boolean): Command {
  return { cmd: "set_morph_hold", hold };
}

export function joinCollectiveCommand(group: "F" | "M"): Command {
  return { cmd: "assign_collective", group };
}

export function statusCommand(): Command {
  return { cmd: "get_status" };
}

export interface LandmarkRecord {
  t: number;
  w: number;
  h: number;
  pts: [number, number][];
}

export function frameCommand(record: LandmarkRecord): Command {
  return { cmd: "frame", t: record.t, w: record.w, h: record.h, pts: record.pts };
}
