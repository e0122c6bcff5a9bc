import { describe, expect, it } from "vitest";

import { parseModelContainer } from "../src/container.js";
import { fixtureBytes, fixtureJson } from "./helpers.js";

interface Summary {
  n_vertices: number;
  n_id: number;
  n_expr: number;
  n_color: number;
  tag: string;
  n_triangles: number;
  mean_shape_head: number[];
  identity_sigma: number[];
  landmark_vertices_head: number[];
}

const summary = fixtureJson<Summary>("model_summary.json");
const model = parseModelContainer(fixtureBytes("model_global.mod3dmm"));

describe("model container parsing", () => {
  it("reads the manifest dimensions", () => {
    expect(model.nVertices).toBe(summary.n_vertices);
    expect(model.nId).toBe(summary.n_id);
    expect(model.nExpr).toBe(summary.n_expr);
    expect(model.nColor).toBe(summary.n_color);
    expect(model.tag).toBe(summary.tag);
    expect(model.topology.length).toBe(3 * summary.n_triangles);
  });

  it("maps the float arrays at the right offsets", () => {
    for (let i = 0; i < summary.mean_shape_head.length; i++) {
      expect(model.meanShape[i]).toBeCloseTo(summary.mean_shape_head[i], 6);
    }
    for (let i = 0; i < summary.identity_sigma.length; i++) {
      expect(model.identitySigma[i]).toBeCloseTo(summary.identity_sigma[i], 6);
    }
    expect(model.identityBasis.length).toBe(3 * model.nVertices * model.nId);
    expect(model.expressionBasis.length).toBe(3 * model.nVertices * model.nExpr);
  });

  it("reads the landmark correspondence in landmark order", () => {
    for (let i = 0; i < summary.landmark_vertices_head.length; i++) {
      expect(model.landmarkVertices[i]).toBe(summary.landmark_vertices_head[i]);
    }
    const seen = new Set(Array.from(model.landmarkVertices));
    expect(seen.size).toBe(68);
  });

  it("sees orthonormal basis columns", () => {
    const n3 = 3 * model.nVertices;
    const dot = (a: number, b: number): number => {
      let acc = 0;
      for (let i = 0; i < n3; i++) {
        acc += model.identityBasis[i * model.nId + a] * model.identityBasis[i * model.nId + b];
      }
      return acc;
    };
    expect(dot(0, 0)).toBeCloseTo(1.0, 6);
    expect(dot(1, 1)).toBeCloseTo(1.0, 6);
    expect(Math.abs(dot(0, 1))).toBeLessThan(1e-6);
  });

  it("rejects corrupted containers", () => {
    const bytes = new Uint8Array(fixtureBytes("model_global.mod3dmm")).slice();
    bytes[2] = 0x58; // damage the magic inside the JSON header
    expect(() => parseModelContainer(bytes.buffer)).toThrow();
  });
});
