/**
 * Client-side geometry reconstruction from streamed coefficients:
 * shape = mean + identityBasis @ a + expressionBasis @ q, then the
 * scaled-orthographic pose. Accumulation runs in float64 (JS numbers), so
 * fidelity is limited only by the float32 model arrays and wire transport.
 */

import type { ClientModel } from "./container.js";
import type { GeometryFrame } from "./protocol.js";

export function reconstructShape(
  model: ClientModel,
  identity: ArrayLike<number>,
  expression: ArrayLike<number>,
): Float64Array {
  const n3 = 3 * model.nVertices;
  const nId = model.nId;
  const nExpr = model.nExpr;
  if (identity.length !== nId) throw new Error(`identity length ${identity.length} != ${nId}`);
  if (expression.length !== nExpr) throw new Error(`expression length ${expression.length} != ${nExpr}`);
  const out = new Float64Array(n3);
  const mean = model.meanShape;
  const u = model.identityBasis;
  const v = model.expressionBasis;
  for (let i = 0; i < n3; i++) {
    let acc = mean[i];
    const uRow = i * nId;
    for (let j = 0; j < nId; j++) acc += u[uRow + j] * (identity[j] as number);
    if (nExpr) {
      const vRow = i * nExpr;
      for (let k = 0; k < nExpr; k++) acc += v[vRow + k] * (expression[k] as number);
    }
    out[i] = acc;
  }
  return out;
}

/** Geometry for a frame: reconstructed in coefficient mode, as-sent otherwise. */
export function frameShape(model: ClientModel, frame: GeometryFrame): Float64Array {
  if (frame.vertices) {
    return Float64Array.from(frame.vertices);
  }
  if (!frame.identity || !frame.expression) {
    throw new Error("coefficient frame lacks coefficient arrays");
  }
  return reconstructShape(model, frame.identity, frame.expression);
}

/**
 * Apply the pose: p = s * R @ X + (s*tx, s*ty, 0). Depth (the rotated z,
 * scaled) is kept so the renderer can shade and sort.
 */
export function applyPose(
  shape: ArrayLike<number>,
  rotation: ArrayLike<number>,
  scale: number,
  translation: [number, number],
): Float32Array {
  const n = shape.length / 3;
  const out = new Float32Array(shape.length);
  const [tx, ty] = translation;
  for (let i = 0; i < n; i++) {
    const x = shape[3 * i] as number;
    const y = shape[3 * i + 1] as number;
    const z = shape[3 * i + 2] as number;
    out[3 * i] = scale * ((rotation[0] as number) * x + (rotation[1] as number) * y + (rotation[2] as number) * z) + scale * tx;
    out[3 * i + 1] = scale * ((rotation[3] as number) * x + (rotation[4] as number) * y + (rotation[5] as number) * z) + scale * ty;
    out[3 * i + 2] = scale * ((rotation[6] as number) * x + (rotation[7] as number) * y + (rotation[8] as number) * z);
  }
  return out;
}
