import { describe, expect, it } from "vitest";

import { decodeGeometryFrame, encodeCommand } from "../src/protocol.js";
import { fixtureBytes, fixtureJson } from "./helpers.js";

interface Expected {
  seq: number;
  t_ms: number;
  rmse: number;
  morph_p: number;
  morph_hold: boolean;
  transform_active: boolean;
  scale: number;
  translation: number[];
  rotation: number[];
  identity: number[];
  expression: number[];
  vertices: number[];
}

const expected = fixtureJson<Expected>("geometry_expected.json");

describe("binary geometry frames", () => {
  it("decodes a coefficients-mode frame bit-exactly", () => {
    const frame = decodeGeometryFrame(fixtureBytes("geometry_coefficients.bin"));
    expect(frame.mode).toBe(0);
    expect(frame.seq).toBe(expected.seq);
    expect(frame.tMs).toBe(expected.t_ms);
    expect(frame.transformActive).toBe(expected.transform_active);
    expect(frame.morphHold).toBe(expected.morph_hold);
    expect(frame.rmse).toBeCloseTo(expected.rmse, 7);
    expect(frame.morphP).toBeCloseTo(expected.morph_p, 7);
    expect(frame.scale).toBeCloseTo(expected.scale, 7);
    expect(Array.from(frame.translation)).toEqual(expected.translation);
    expect(Array.from(frame.rotation)).toEqual(expected.rotation);
    expect(Array.from(frame.identity!)).toEqual(expected.identity);
    expect(Array.from(frame.expression!)).toEqual(expected.expression);
    expect(frame.vertices).toBeUndefined();
  });

  it("decodes a vertices-mode frame bit-exactly", () => {
    const frame = decodeGeometryFrame(fixtureBytes("geometry_vertices.bin"));
    expect(frame.mode).toBe(1);
    expect(Array.from(frame.vertices!)).toEqual(expected.vertices);
    expect(frame.identity).toBeUndefined();
  });

  it("rejects a wrong magic", () => {
    const bytes = new Uint8Array(fixtureBytes("geometry_vertices.bin")).slice();
    bytes[0] = 0x58;
    expect(() => decodeGeometryFrame(bytes.buffer)).toThrow(/magic/);
  });

  it("reports morph p as null when no transform is active", () => {
    const bytes = new Uint8Array(fixtureBytes("geometry_vertices.bin")).slice();
    bytes[9] = 0; // clear the flags byte
    const frame = decodeGeometryFrame(bytes.buffer);
    expect(frame.morphP).toBeNull();
    expect(frame.transformActive).toBe(false);
  });
});

describe("canonical command encoding", () => {
  it("sorts keys and strips whitespace", () => {
    expect(encodeCommand({ cmd: "set_transform", tag: "x", box_scale: 2.5 }))
      .toBe('{"box_scale":2.5,"cmd":"set_transform","tag":"x"}');
  });

  it("keeps array order (landmark points)", () => {
    expect(encodeCommand({ cmd: "frame", t: 1, w: 2, h: 3, pts: [[1, 2], [3, 4]] }))
      .toBe('{"cmd":"frame","h":3,"pts":[[1,2],[3,4]],"t":1,"w":2}');
  });
});
