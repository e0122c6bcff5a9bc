/**
 * Model container parser (format reference: ../protocol.md section 2).
 * The client needs the mean shape, bases and topology to reconstruct
 * geometry from streamed coefficients.
 */

export interface ClientModel {
  nVertices: number;
  nId: number;
  nExpr: number;
  nColor: number;
  tag: string;
  name: string;
  /** interleaved [x1,y1,z1,...], length 3N */
  meanShape: Float32Array;
  /** row-major (3N, nId) */
  identityBasis: Float32Array;
  identitySigma: Float32Array;
  /** row-major (3N, nExpr); empty when nExpr = 0 */
  expressionBasis: Float32Array;
  expressionSigma: Float32Array;
  meanColor: Float32Array | null;
  colorBasis: Float32Array | null;
  /** flat (T, 3) */
  topology: Uint32Array;
  /** vertex index per 0-based MULTI-PIE landmark */
  landmarkVertices: Uint32Array;
}

interface ArrayEntry {
  offset: number;
  length: number;
  dtype: "f4" | "u4";
  shape: number[];
}

interface Manifest {
  magic: string;
  version: number;
  n_vertices: number;
  n_id: number;
  n_expr: number;
  n_color: number;
  tag: string;
  name: string;
  arrays: Record<string, ArrayEntry>;
}

export function parseModelContainer(buffer: ArrayBuffer): ClientModel {
  const bytes = new Uint8Array(buffer);
  const newline = bytes.indexOf(0x0a);
  if (newline < 0) throw new Error("model container: no manifest terminator");
  const manifest = JSON.parse(new TextDecoder().decode(bytes.subarray(0, newline))) as Manifest;
  if (manifest.magic !== "MOD3DMM") throw new Error("model container: bad magic");
  if (manifest.version !== 1) throw new Error(`model container: unsupported version ${manifest.version}`);

  const f32 = (name: string): Float32Array => {
    const entry = requireEntry(manifest, name, "f4");
    return new Float32Array(buffer, entry.offset, entry.length / 4);
  };
  const u32 = (name: string): Uint32Array => {
    const entry = requireEntry(manifest, name, "u4");
    return new Uint32Array(buffer, entry.offset, entry.length / 4);
  };

  const n3 = 3 * manifest.n_vertices;
  const meanShape = f32("mean_shape");
  if (meanShape.length !== n3) throw new Error("model container: mean_shape size mismatch");

  const pairs = u32("correspondence");
  const landmarkVertices = new Uint32Array(68);
  for (let i = 0; i < 68; i++) {
    landmarkVertices[pairs[2 * i]] = pairs[2 * i + 1];
  }

  return {
    nVertices: manifest.n_vertices,
    nId: manifest.n_id,
    nExpr: manifest.n_expr,
    nColor: manifest.n_color,
    tag: manifest.tag,
    name: manifest.name,
    meanShape,
    identityBasis: f32("identity_basis"),
    identitySigma: f32("identity_sigma"),
    expressionBasis: manifest.n_expr ? f32("expression_basis") : new Float32Array(0),
    expressionSigma: manifest.n_expr ? f32("expression_sigma") : new Float32Array(0),
    meanColor: manifest.n_color ? f32("mean_color") : null,
    colorBasis: manifest.n_color ? f32("color_basis") : null,
    topology: u32("topology"),
    landmarkVertices,
  };
}

function requireEntry(manifest: Manifest, name: string, dtype: "f4" | "u4"): ArrayEntry {
  const entry = manifest.arrays[name];
  if (!entry) throw new Error(`model container: missing array '${name}'`);
  if (entry.dtype !== dtype) throw new Error(`model container: '${name}' has dtype ${entry.dtype}`);
  const count = entry.shape.reduce((a, b) => a * b, 1);
  if (entry.length !== 4 * count) {
    throw new Error(`model container: '${name}' byte length does not match its shape`);
  }
  if (entry.offset % 8 !== 0) throw new Error(`model container: '${name}' offset not aligned`);
  return entry;
}
