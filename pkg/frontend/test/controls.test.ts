import { describe, expect, it } from "vitest";

import {
  calibrateCommand,
  finishCalibrationCommand,
  clearTransformCommand,
  helloCommand,
  joinCollectiveCommand,
  setMorphHoldCommand,
  setTransformCommand,
  statusCommand,
} from "../src/controls.js";
import { encodeCommand } from "../src/protocol.js";
import { fixtureJson } from "./helpers.js";

// engine-generated canonical encodings; every control must match byte-for-byte
const fixtures = fixtureJson<Record<string, string>>("commands.json");

const controls: Record<string, string> = {
  connect: encodeCommand(helloCommand("coefficients")),
  connect_vertices: encodeCommand(helloCommand("vertices")),
  calibrate: encodeCommand(calibrateCommand()),
  finish_calibration: encodeCommand(finishCalibrationCommand()),
  pick_female_africa: encodeCommand(setTransformCommand("female-africa")),
  pick_male_asia_custom: encodeCommand(setTransformCommand("male-asia", 2.5, 600)),
  clear_transform: encodeCommand(clearTransformCommand()),
  hold_on: encodeCommand(setMorphHoldCommand(true)),
  hold_off: encodeCommand(setMorphHoldCommand(false)),
  join_collective_f: encodeCommand(joinCollectiveCommand("F")),
  join_collective_m: encodeCommand(joinCollectiveCommand("M")),
  refresh_status: encodeCommand(statusCommand()),
};

describe("control panel protocol conformance", () => {
  it("covers every fixture command", () => {
    expect(Object.keys(controls).sort()).toEqual(Object.keys(fixtures).sort());
  });

  for (const name of Object.keys(fixtures)) {
    it(`control '${name}' emits the exact fixture bytes`, () => {
      expect(controls[name]).toBe(fixtures[name]);
    });
  }
});
