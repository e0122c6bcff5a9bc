"""Linear 3D face models: container IO, shape/color synthesis, synthetic generation.

A model is a mean shape plus orthonormal PCA bases for identity and expression,
with per-component standard deviations. Shape vectors are interleaved per vertex
``[x1, y1, z1, x2, y2, z2, ...]`` so a scaled-orthographic projection acts on them
as a block-diagonal matrix of identical 2x3 blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import (
    CoefficientLengthMismatch,
    DimensionMismatch,
    IoFailure,
    MalformedContainer,
    NoColorModel,
    NonOrthonormalBasis,
    NonPositiveSigma,
    TooManyComponents,
)

CONTAINER_MAGIC = "MOD3DMM"
CONTAINER_VERSION = 1
N_LANDMARKS = 68

ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class LandmarkCorrespondence:
    """One landmark-to-vertex pairing (0-based landmark index, MULTI-PIE order)."""

    landmark_index: int
    vertex_index: int


@dataclass(frozen=True)
class MorphableModel:
    """Immutable linear face model.

    Attributes
    ----------
    n_vertices : int
        Vertex count N.
    mean_shape : ndarray, shape (3N,)
        Mean face, interleaved per-vertex coordinates, model units.
    identity_basis : ndarray, shape (3N, n_id)
        Orthonormal identity basis columns.
    identity_sigma : ndarray, shape (n_id,)
        Per-component standard deviations, strictly positive.
    expression_basis : ndarray, shape (3N, n_expr)
        Orthonormal expression basis columns; n_expr may be 0.
    expression_sigma : ndarray, shape (n_expr,)
    mean_color : ndarray, shape (3N,), optional
        Per-vertex RGB in [0, 1], interleaved like shapes.
    color_basis : ndarray, shape (3N, n_color), optional
    topology : ndarray, shape (T, 3), uint32
        Triangle list indexing vertices.
    landmark_vertices : ndarray, shape (68,), uint32
        Entry i is the model vertex matched to 0-based landmark i.
    tag : str
        Demographic tag, e.g. "global" or "female-africa".
    name : str
        Human-readable model name.
    """

    n_vertices: int
    mean_shape: np.ndarray
    identity_basis: np.ndarray
    identity_sigma: np.ndarray
    expression_basis: np.ndarray
    expression_sigma: np.ndarray
    mean_color: np.ndarray | None
    color_basis: np.ndarray | None
    topology: np.ndarray
    landmark_vertices: np.ndarray
    tag: str
    name: str = ""

    @property
    def n_id(self) -> int:
        return self.identity_basis.shape[1]

    @property
    def n_expr(self) -> int:
        return self.expression_basis.shape[1]

    @property
    def n_color(self) -> int:
        return 0 if self.color_basis is None else self.color_basis.shape[1]

    @property
    def has_color(self) -> bool:
        return self.mean_color is not None

    def correspondence(self) -> list[LandmarkCorrespondence]:
        """The landmark table as explicit records, in landmark order."""
        return [
            LandmarkCorrespondence(i, int(v))
            for i, v in enumerate(self.landmark_vertices)
        ]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_orthonormal(basis: np.ndarray, label: str) -> None:
    if basis.shape[1] == 0:
        return
    gram = basis.T @ basis
    dev = np.max(np.abs(gram - np.eye(basis.shape[1])))
    if dev >= ORTHONORMALITY_TOL:
        raise NonOrthonormalBasis(
            f"{label} deviates from orthonormality by {dev:.3e} (tol {ORTHONORMALITY_TOL:g})"
        )


def validate_model(model: MorphableModel) -> None:
    """Check every structural invariant; raise a specific error on violation."""
    n3 = 3 * model.n_vertices
    if model.mean_shape.shape != (n3,):
        raise DimensionMismatch(f"mean_shape has shape {model.mean_shape.shape}, expected ({n3},)")
    for label, basis in (("identity_basis", model.identity_basis),
                         ("expression_basis", model.expression_basis)):
        if basis.ndim != 2 or basis.shape[0] != n3:
            raise DimensionMismatch(f"{label} has shape {basis.shape}, expected ({n3}, k)")
    if model.identity_sigma.shape != (model.n_id,):
        raise DimensionMismatch("identity_sigma length does not match identity_basis")
    if model.expression_sigma.shape != (model.n_expr,):
        raise DimensionMismatch("expression_sigma length does not match expression_basis")
    if (model.mean_color is None) != (model.color_basis is None):
        raise DimensionMismatch("mean_color and color_basis must be present together")
    if model.mean_color is not None:
        if model.mean_color.shape != (n3,):
            raise DimensionMismatch("mean_color length must be 3*n_vertices")
        if model.color_basis.shape[0] != n3:
            raise DimensionMismatch("color_basis row count must be 3*n_vertices")
        if np.min(model.mean_color) < 0.0 or np.max(model.mean_color) > 1.0:
            raise MalformedContainer("mean_color entries must lie in [0, 1]")

    for label, sigma in (("identity_sigma", model.identity_sigma),
                         ("expression_sigma", model.expression_sigma)):
        if sigma.size and np.min(sigma) <= 0.0:
            raise NonPositiveSigma(f"{label} has a non-positive entry")

    _check_orthonormal(model.identity_basis, "identity_basis")
    _check_orthonormal(model.expression_basis, "expression_basis")
    if model.color_basis is not None:
        _check_orthonormal(model.color_basis, "color_basis")

    tri = model.topology
    if tri.ndim != 2 or tri.shape[1] != 3:
        raise DimensionMismatch("topology must be a (T, 3) triangle list")
    if tri.size:
        if int(tri.max()) >= model.n_vertices:
            raise MalformedContainer("topology references a vertex index out of range")
        degenerate = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
        if bool(degenerate.any()):
            raise MalformedContainer("topology contains a triangle with repeated indices")

    lv = model.landmark_vertices
    if lv.shape != (N_LANDMARKS,):
        raise DimensionMismatch(f"landmark table must have exactly {N_LANDMARKS} entries")
    if len(np.unique(lv)) != N_LANDMARKS:
        raise MalformedContainer("landmark table maps two landmarks to one vertex")
    if int(lv.max()) >= model.n_vertices:
        raise MalformedContainer("landmark table references a vertex index out of range")

    if not np.isfinite(model.mean_shape).all():
        raise MalformedContainer("mean_shape contains non-finite values")


# --- synthesis ---

def synthesize_shape(model: MorphableModel, p: np.ndarray, q: np.ndarray | None = None) -> np.ndarray:
    """Return ``mean + identity_basis @ p + expression_basis @ q`` as a 3N vector."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (model.n_id,):
        raise CoefficientLengthMismatch(f"identity coefficients: got {p.shape}, need ({model.n_id},)")
    shape = model.mean_shape + model.identity_basis @ p
    if q is not None or model.n_expr:
        q = np.zeros(model.n_expr) if q is None else np.asarray(q, dtype=np.float64)
        if q.shape != (model.n_expr,):
            raise CoefficientLengthMismatch(f"expression coefficients: got {q.shape}, need ({model.n_expr},)")
        if model.n_expr:
            shape = shape + model.expression_basis @ q
    return shape


def synthesize_color(model: MorphableModel, lam: np.ndarray) -> np.ndarray:
    """Return the per-vertex RGB vector ``mean_color + color_basis @ lam``, clamped to [0, 1]."""
    if model.mean_color is None or model.color_basis is None:
        raise NoColorModel(f"model '{model.tag}' carries no color model")
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (model.n_color,):
        raise CoefficientLengthMismatch(f"color coefficients: got {lam.shape}, need ({model.n_color},)")
    return np.clip(model.mean_color + model.color_basis @ lam, 0.0, 1.0)


# --- container format ---

_ARRAY_ORDER = (
    "mean_shape", "identity_basis", "identity_sigma",
    "expression_basis", "expression_sigma",
    "mean_color", "color_basis",
    "topology", "correspondence",
)


def _align8(n: int) -> int:
    return (n + 7) & ~7


def _container_blobs(model: MorphableModel) -> dict[str, np.ndarray]:
    blobs: dict[str, np.ndarray] = {
        "mean_shape": model.mean_shape.astype("<f4"),
        "identity_basis": np.ascontiguousarray(model.identity_basis, dtype="<f4"),
        "identity_sigma": model.identity_sigma.astype("<f4"),
    }
    if model.n_expr:
        blobs["expression_basis"] = np.ascontiguousarray(model.expression_basis, dtype="<f4")
        blobs["expression_sigma"] = model.expression_sigma.astype("<f4")
    if model.has_color:
        blobs["mean_color"] = model.mean_color.astype("<f4")
        blobs["color_basis"] = np.ascontiguousarray(model.color_basis, dtype="<f4")
    blobs["topology"] = np.ascontiguousarray(model.topology, dtype="<u4")
    pairs = np.stack(
        [np.arange(N_LANDMARKS, dtype="<u4"), model.landmark_vertices.astype("<u4")], axis=1
    )
    blobs["correspondence"] = np.ascontiguousarray(pairs)
    return blobs


def container_bytes(model: MorphableModel) -> bytes:
    """Serialize a model to the single-file container as a byte string."""
    blobs = _container_blobs(model)
    names = [n for n in _ARRAY_ORDER if n in blobs]

    def manifest_for(header_size: int) -> dict:
        arrays = {}
        offset = header_size
        for nm in names:
            arr = blobs[nm]
            offset = _align8(offset)
            arrays[nm] = {
                "offset": offset,
                "length": arr.nbytes,
                "dtype": "u4" if arr.dtype.kind == "u" else "f4",
                "shape": list(arr.shape),
            }
            offset += arr.nbytes
        return {
            "magic": CONTAINER_MAGIC,
            "version": CONTAINER_VERSION,
            "n_vertices": model.n_vertices,
            "n_id": model.n_id,
            "n_expr": model.n_expr,
            "n_color": model.n_color,
            "tag": model.tag,
            "name": model.name,
            "arrays": arrays,
        }

    header_size = 0
    raw = b""
    for _ in range(8):
        raw = json.dumps(manifest_for(header_size), separators=(",", ":")).encode("utf-8")
        needed = _align8(len(raw) + 1)
        if needed == header_size:
            break
        header_size = needed
    else:
        raise MalformedContainer("manifest size failed to stabilize")

    out = bytearray(raw)
    out.extend(b" " * (header_size - len(raw) - 1))
    out.extend(b"\n")
    manifest = manifest_for(header_size)
    for nm in names:
        entry = manifest["arrays"][nm]
        out.extend(b"\0" * (entry["offset"] - len(out)))
        out.extend(blobs[nm].tobytes())
    return bytes(out)


def save_model(model: MorphableModel, path: str | Path) -> None:
    """Write the container file. Float arrays are stored as little-endian float32;
    models produced by the generator or by ``load_model`` round-trip bit-exactly."""
    validate_model(model)
    data = container_bytes(model)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write model container to {path}: {exc}") from exc


def model_from_container_bytes(data: bytes) -> MorphableModel:
    """Parse container bytes into a validated model."""
    newline = data.find(b"\n")
    if newline < 0:
        raise MalformedContainer("no manifest terminator found")
    try:
        manifest = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedContainer(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("magic") != CONTAINER_MAGIC:
        raise MalformedContainer("bad magic; not a model container")
    if manifest.get("version") != CONTAINER_VERSION:
        raise MalformedContainer(f"unsupported container version {manifest.get('version')!r}")
    try:
        n = int(manifest["n_vertices"])
        n_id = int(manifest["n_id"])
        n_expr = int(manifest["n_expr"])
        n_color = int(manifest["n_color"])
        tag = str(manifest["tag"])
        name = str(manifest.get("name", ""))
        entries = manifest["arrays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedContainer(f"manifest is missing required fields: {exc}") from exc

    expected_shapes = {
        "mean_shape": ("f4", (3 * n,)),
        "identity_basis": ("f4", (3 * n, n_id)),
        "identity_sigma": ("f4", (n_id,)),
        "topology": ("u4", None),
        "correspondence": ("u4", (N_LANDMARKS, 2)),
    }
    if n_expr:
        expected_shapes["expression_basis"] = ("f4", (3 * n, n_expr))
        expected_shapes["expression_sigma"] = ("f4", (n_expr,))
    if n_color:
        expected_shapes["mean_color"] = ("f4", (3 * n,))
        expected_shapes["color_basis"] = ("f4", (3 * n, n_color))

    arrays: dict[str, np.ndarray] = {}
    for nm, (kind, want_shape) in expected_shapes.items():
        if nm not in entries:
            raise MalformedContainer(f"manifest lacks required array '{nm}'")
        entry = entries[nm]
        try:
            offset, length, shape = int(entry["offset"]), int(entry["length"]), tuple(entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedContainer(f"bad manifest entry for '{nm}': {exc}") from exc
        if offset % 8:
            raise MalformedContainer(f"array '{nm}' offset {offset} is not 8-byte aligned")
        if entry.get("dtype") != kind:
            raise DimensionMismatch(f"array '{nm}' has dtype {entry.get('dtype')!r}, expected {kind!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 0
        if length != count * 4:
            raise DimensionMismatch(f"array '{nm}' byte length {length} does not match shape {shape}")
        if want_shape is not None and shape != want_shape:
            raise DimensionMismatch(f"array '{nm}' has shape {shape}, expected {want_shape}")
        if nm == "topology" and (len(shape) != 2 or shape[1] != 3):
            raise DimensionMismatch(f"topology shape {shape} is not (T, 3)")
        if offset + length > len(data):
            raise DimensionMismatch(f"array '{nm}' extends past end of file")
        dt = "<u4" if kind == "u4" else "<f4"
        arrays[nm] = np.frombuffer(data, dtype=dt, count=count, offset=offset).reshape(shape)

    pairs = arrays["correspondence"]
    order = np.argsort(pairs[:, 0])
    lm_idx = pairs[order, 0]
    if not np.array_equal(lm_idx, np.arange(N_LANDMARKS, dtype=lm_idx.dtype)):
        raise MalformedContainer("correspondence landmark indices are not a permutation of 0..67")
    landmark_vertices = pairs[order, 1].astype(np.uint32)

    def f64(nm: str) -> np.ndarray:
        return arrays[nm].astype(np.float64)

    model = MorphableModel(
        n_vertices=n,
        mean_shape=_freeze(f64("mean_shape")),
        identity_basis=_freeze(f64("identity_basis")),
        identity_sigma=_freeze(f64("identity_sigma")),
        expression_basis=_freeze(f64("expression_basis") if n_expr else np.zeros((3 * n, 0))),
        expression_sigma=_freeze(f64("expression_sigma") if n_expr else np.zeros(0)),
        mean_color=_freeze(f64("mean_color")) if n_color else None,
        color_basis=_freeze(f64("color_basis")) if n_color else None,
        topology=_freeze(arrays["topology"].astype(np.uint32)),
        landmark_vertices=_freeze(landmark_vertices),
        tag=tag,
        name=name,
    )
    validate_model(model)
    return model


def load_model(path: str | Path) -> MorphableModel:
    """Read and validate a model container file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read model container {path}: {exc}") from exc
    return model_from_container_bytes(data)


# --- synthetic generation ---

def _f32exact(arr: np.ndarray) -> np.ndarray:
    """Round to float32 and back so container round-trips are bit-exact."""
    return arr.astype(np.float32).astype(np.float64)


def _ellipsoid_head(n_vertices: int) -> tuple[np.ndarray, np.ndarray]:
    """Head-like ellipsoid point cloud (Fibonacci lattice) with a hull triangulation.

    Axes roughly match a head in millimeters: 80 wide, 110 tall, 70 deep.
    """
    i = np.arange(n_vertices)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    y = 1.0 - 2.0 * (i + 0.5) / n_vertices
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    phi = 2.0 * np.pi * i / golden
    pts = np.stack([80.0 * r * np.cos(phi), 110.0 * y, 70.0 * r * np.sin(phi)], axis=1)
    pts = _f32exact(pts)
    hull = ConvexHull(pts)
    return pts.reshape(-1), hull.simplices.astype(np.uint32)


def _gram_deviation(basis: np.ndarray) -> float:
    if basis.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(basis.T @ basis - np.eye(basis.shape[1]))))


def _orthonormal_f32(rng: np.random.Generator, rows: int, cols: int, attempts: int = 32) -> np.ndarray:
    """Orthonormalized Gaussian matrix that stays orthonormal after float32 rounding.

    Rounding perturbs the Gram matrix by noise on the order of 1e-7/sqrt(rows),
    which for very small models can brush the 1e-8 tolerance; redrawing is an
    independent sample of that noise, so a few deterministic retries suffice.
    """
    if cols == 0:
        return np.zeros((rows, 0))
    for _ in range(attempts):
        q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
        q = _f32exact(q)
        if _gram_deviation(q) < 0.8 * ORTHONORMALITY_TOL:
            return q
    raise NonOrthonormalBasis(
        f"could not float32-round a {rows}x{cols} basis inside the orthonormality tolerance"
    )


def _spread_landmark_vertices(n_vertices: int) -> np.ndarray:
    lv = np.round(np.linspace(0, n_vertices - 1, N_LANDMARKS)).astype(np.uint32)
    if len(np.unique(lv)) != N_LANDMARKS:
        raise ValueError("could not pick 68 distinct landmark vertices")
    return lv


def generate_synthetic_model(
    seed: int,
    n_vertices: int = 500,
    n_id: int = 10,
    n_expr: int = 5,
    tag: str = "global",
    *,
    n_color: int = 0,
    name: str | None = None,
) -> MorphableModel:
    """Deterministic stand-in model for tests and demos.

    The mean is a head-like ellipsoid lattice with a convex-hull triangulation;
    bases come from QR-orthonormalizing seeded Gaussian matrices (identity,
    expression and color drawn jointly, so the blocks are mutually orthogonal);
    sigmas decay log-spaced from 1.0 to 0.01. All float arrays are rounded to
    float32 so the container round-trip is bit-exact.
    """
    if n_vertices < N_LANDMARKS:
        raise ValueError(f"need at least {N_LANDMARKS} vertices for the landmark table")
    n3 = 3 * n_vertices
    if n_id + n_expr > n3 - 7:
        raise TooManyComponents(
            f"n_id + n_expr = {n_id + n_expr} exceeds 3*n_vertices - 7 = {n3 - 7}"
        )
    if n_id + n_expr + n_color > n3:
        raise TooManyComponents("total component count exceeds 3*n_vertices")

    rng = np.random.default_rng(seed)
    mean_shape, topology = _ellipsoid_head(n_vertices)

    total = n_id + n_expr + n_color
    basis = _orthonormal_f32(rng, n3, total)
    identity_basis = basis[:, :n_id]
    expression_basis = basis[:, n_id:n_id + n_expr]
    color_basis = basis[:, n_id + n_expr:] if n_color else None

    def sigmas(k: int) -> np.ndarray:
        return _f32exact(np.geomspace(1.0, 0.01, k)) if k else np.zeros(0)

    mean_color = None
    if n_color:
        t = np.arange(n3)
        mean_color = _f32exact(0.5 + 0.3 * np.sin(0.05 * t + 0.7 * (t % 3)))

    model = MorphableModel(
        n_vertices=n_vertices,
        mean_shape=_freeze(mean_shape),
        identity_basis=_freeze(identity_basis),
        identity_sigma=_freeze(sigmas(n_id)),
        expression_basis=_freeze(expression_basis),
        expression_sigma=_freeze(sigmas(n_expr)),
        mean_color=_freeze(mean_color) if mean_color is not None else None,
        color_basis=_freeze(color_basis) if color_basis is not None else None,
        topology=_freeze(topology),
        landmark_vertices=_freeze(_spread_landmark_vertices(n_vertices)),
        tag=tag,
        name=name if name is not None else f"synthetic-{tag}",
    )
    validate_model(model)
    return model


def generate_bespoke_model(
    base: MorphableModel,
    seed: int,
    tag: str,
    n_id: int | None = None,
    *,
    mean_offset_scale: float = 1.0,
    name: str | None = None,
) -> MorphableModel:
    """Derive a demographic target model whose identity span lies inside the base span.

    The derived mean is the base mean plus an in-span offset, and the derived
    basis is a rotated subset of the base identity basis. The expression and
    color models are shared with the base. Keeping the span nested means a
    client holding only the base model can reproduce transformed geometry from
    coefficients alone (up to float32 container rounding).
    """
    k = base.n_id if n_id is None else n_id
    if k > base.n_id:
        raise TooManyComponents(f"bespoke n_id {k} exceeds base n_id {base.n_id}")
    rng = np.random.default_rng(seed)
    offset = rng.standard_normal(base.n_id) * base.identity_sigma * mean_offset_scale
    mean = _f32exact(base.mean_shape + base.identity_basis @ offset)
    for _ in range(32):
        mix, _ = np.linalg.qr(rng.standard_normal((base.n_id, k)))
        basis = _f32exact(base.identity_basis @ mix)
        if _gram_deviation(basis) < 0.8 * ORTHONORMALITY_TOL:
            break
    else:
        raise NonOrthonormalBasis("could not derive a float32-stable rotated basis")
    sigma = _f32exact(np.geomspace(0.9, 0.009, k))

    model = MorphableModel(
        n_vertices=base.n_vertices,
        mean_shape=_freeze(mean),
        identity_basis=_freeze(basis),
        identity_sigma=_freeze(sigma),
        expression_basis=base.expression_basis,
        expression_sigma=base.expression_sigma,
        mean_color=base.mean_color,
        color_basis=base.color_basis,
        topology=base.topology,
        landmark_vertices=base.landmark_vertices,
        tag=tag,
        name=name if name is not None else f"synthetic-{tag}",
    )
    validate_model(model)
    return model
