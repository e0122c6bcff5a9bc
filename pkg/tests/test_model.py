import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facemirror.errors import (
    CoefficientLengthMismatch,
    DimensionMismatch,
    IoFailure,
    MalformedContainer,
    NoColorModel,
    NonOrthonormalBasis,
    NonPositiveSigma,
    TooManyComponents,
)
from facemirror.model import (
    container_bytes,
    generate_bespoke_model,
    generate_synthetic_model,
    load_model,
    model_from_container_bytes,
    save_model,
    synthesize_color,
    synthesize_shape,
    validate_model,
)

from oracles import dense_matvec


def test_generated_model_satisfies_invariants(small_model):
    validate_model(small_model)
    gram = small_model.identity_basis.T @ small_model.identity_basis
    assert np.max(np.abs(gram - np.eye(small_model.n_id))) < 1e-8
    gram_e = small_model.expression_basis.T @ small_model.expression_basis
    assert np.max(np.abs(gram_e - np.eye(small_model.n_expr))) < 1e-8
    assert np.all(small_model.identity_sigma > 0)
    assert small_model.topology.max() < small_model.n_vertices
    assert len(np.unique(small_model.landmark_vertices)) == 68


def test_generation_is_deterministic():
    a = generate_synthetic_model(seed=5, n_vertices=120, n_id=4, n_expr=2, tag="x")
    b = generate_synthetic_model(seed=5, n_vertices=120, n_id=4, n_expr=2, tag="x")
    assert np.array_equal(a.mean_shape, b.mean_shape)
    assert np.array_equal(a.identity_basis, b.identity_basis)
    assert np.array_equal(a.topology, b.topology)


def test_too_many_components_rejected():
    with pytest.raises(TooManyComponents):
        generate_synthetic_model(seed=0, n_vertices=80, n_id=3 * 80, n_expr=0, tag="x")


def test_synthesize_zero_coefficients_is_mean(small_model):
    shape = synthesize_shape(small_model, np.zeros(small_model.n_id), np.zeros(small_model.n_expr))
    assert np.array_equal(shape, small_model.mean_shape)


def test_synthesize_matches_dense_oracle(small_model, rng):
    scale = np.max(np.abs(small_model.mean_shape))
    for _ in range(100):
        p = rng.standard_normal(small_model.n_id)
        got = synthesize_shape(small_model, p, np.zeros(small_model.n_expr))
        want = small_model.mean_shape + dense_matvec(small_model.identity_basis, p)
        assert np.max(np.abs(got - want)) <= 1e-12 * scale


def test_synthesize_with_expression_matches_oracle(small_model, rng):
    p = rng.standard_normal(small_model.n_id)
    q = rng.standard_normal(small_model.n_expr)
    got = synthesize_shape(small_model, p, q)
    want = (small_model.mean_shape
            + dense_matvec(small_model.identity_basis, p)
            + dense_matvec(small_model.expression_basis, q))
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), factor=st.floats(-4, 4, allow_nan=False))
def test_synthesize_linearity(seed, factor):
    model = generate_synthetic_model(seed=3, n_vertices=90, n_id=6, n_expr=0, tag="g")
    p = np.random.default_rng(seed).standard_normal(6)
    base = synthesize_shape(model, p) - model.mean_shape
    scaled = synthesize_shape(model, factor * p) - model.mean_shape
    assert np.max(np.abs(scaled - factor * base)) < 1e-10 * max(1.0, abs(factor))


def test_synthesize_length_mismatch(small_model):
    with pytest.raises(CoefficientLengthMismatch):
        synthesize_shape(small_model, np.zeros(small_model.n_id + 1))
    with pytest.raises(CoefficientLengthMismatch):
        synthesize_shape(small_model, np.zeros(small_model.n_id), np.zeros(small_model.n_expr + 2))


def test_color_zero_coefficients_is_mean(small_model):
    out = synthesize_color(small_model, np.zeros(small_model.n_color))
    assert np.array_equal(out, small_model.mean_color)


def test_color_matches_oracle_before_clamp(small_model, rng):
    lam = 0.01 * rng.standard_normal(small_model.n_color)
    raw = small_model.mean_color + dense_matvec(small_model.color_basis, lam)
    assert raw.min() >= 0.0 and raw.max() <= 1.0, "test draw should stay inside [0,1]"
    got = synthesize_color(small_model, lam)
    assert np.max(np.abs(got - raw)) <= 1e-12


def test_color_clamps_to_unit_interval(small_model):
    lam = np.zeros(small_model.n_color)
    lam[0] = 1e3
    out = synthesize_color(small_model, lam)
    assert out.max() <= 1.0 and out.min() >= 0.0
    raw = small_model.mean_color + small_model.color_basis @ lam
    assert raw.max() > 1.0
    assert np.any(out == 1.0)


def test_color_requires_color_model():
    plain = generate_synthetic_model(seed=2, n_vertices=80, n_id=3, n_expr=0, tag="g")
    with pytest.raises(NoColorModel):
        synthesize_color(plain, np.zeros(0))


# --- container round-trips ---

def test_container_roundtrip_bit_exact(small_model, tmp_path):
    path = tmp_path / "m.mod3dmm"
    save_model(small_model, path)
    back = load_model(path)
    for field in ("mean_shape", "identity_basis", "identity_sigma",
                  "expression_basis", "expression_sigma", "mean_color", "color_basis"):
        assert np.array_equal(getattr(back, field), getattr(small_model, field)), field
    assert np.array_equal(back.topology, small_model.topology)
    assert np.array_equal(back.landmark_vertices, small_model.landmark_vertices)
    assert back.tag == small_model.tag and back.name == small_model.name


def test_container_roundtrip_without_expression(tmp_path):
    model = generate_synthetic_model(seed=9, n_vertices=100, n_id=4, n_expr=0, tag="noexpr")
    path = tmp_path / "m.mod3dmm"
    save_model(model, path)
    back = load_model(path)
    assert back.n_expr == 0
    assert back.expression_basis.shape == (300, 0)
    assert np.array_equal(back.mean_shape, model.mean_shape)


def test_save_to_unwritable_destination_fails(small_model, tmp_path):
    # a directory is not a writable file target (permission bits don't stop root)
    with pytest.raises(IoFailure):
        save_model(small_model, tmp_path)
    with pytest.raises(IoFailure):
        save_model(small_model, tmp_path / "missing" / "m.mod3dmm")


def test_save_is_deterministic(small_model):
    assert container_bytes(small_model) == container_bytes(small_model)


def _tamper_manifest(data: bytes, mutate) -> bytes:
    """Rewrite the JSON manifest in place, keeping the header size fixed."""
    end = data.index(b"\n")
    manifest = json.loads(data[:end])
    mutate(manifest)
    raw = json.dumps(manifest, separators=(",", ":")).encode()
    assert len(raw) <= end, "tampered manifest must fit the existing header"
    return raw + b" " * (end - len(raw)) + data[end:]


def test_wrong_magic_rejected(small_model):
    data = _tamper_manifest(container_bytes(small_model),
                            lambda m: m.update(magic="NOTAMOD"))
    with pytest.raises(MalformedContainer):
        model_from_container_bytes(data)


def test_basis_byte_length_mismatch_rejected(small_model):
    def shrink(m):
        m["arrays"]["identity_basis"]["length"] -= 4
    data = _tamper_manifest(container_bytes(small_model), shrink)
    with pytest.raises(DimensionMismatch):
        model_from_container_bytes(data)


def test_zero_sigma_rejected(small_model):
    data = bytearray(container_bytes(small_model))
    end = data.index(b"\n")
    manifest = json.loads(bytes(data[:end]))
    off = manifest["arrays"]["identity_sigma"]["offset"]
    data[off:off + 4] = np.zeros(1, dtype="<f4").tobytes()
    with pytest.raises(NonPositiveSigma):
        model_from_container_bytes(bytes(data))


def test_non_orthonormal_basis_rejected(small_model):
    data = bytearray(container_bytes(small_model))
    end = data.index(b"\n")
    manifest = json.loads(bytes(data[:end]))
    off = manifest["arrays"]["identity_basis"]["offset"]
    stretched = np.frombuffer(bytes(data[off:off + 8]), dtype="<f4") * 5.0
    data[off:off + 8] = stretched.astype("<f4").tobytes()
    with pytest.raises(NonOrthonormalBasis):
        model_from_container_bytes(bytes(data))


def test_correspondence_permutation_enforced(small_model):
    data = bytearray(container_bytes(small_model))
    end = data.index(b"\n")
    manifest = json.loads(bytes(data[:end]))
    off = manifest["arrays"]["correspondence"]["offset"]
    # landmark index of the first pair: make it a duplicate of the second pair
    data[off:off + 4] = np.asarray([1], dtype="<u4").tobytes()
    with pytest.raises(MalformedContainer):
        model_from_container_bytes(bytes(data))


def test_truncated_container_rejected(small_model):
    data = container_bytes(small_model)
    with pytest.raises((MalformedContainer, DimensionMismatch)):
        model_from_container_bytes(data[:len(data) // 2])


# --- bespoke derivation ---

def test_bespoke_model_lies_in_base_span(small_model, bespoke_model):
    validate_model(bespoke_model)
    u = small_model.identity_basis
    # float32 container rounding leaves a small out-of-span residual; what
    # matters downstream is that it stays far below the 1e-4 wire tolerance
    centered_mean = bespoke_model.mean_shape - small_model.mean_shape
    residual = centered_mean - u @ (u.T @ centered_mean)
    assert np.max(np.abs(residual)) < 1e-5
    for j in range(bespoke_model.n_id):
        col = bespoke_model.identity_basis[:, j]
        res = col - u @ (u.T @ col)
        assert np.linalg.norm(res) < 1e-6


def test_bespoke_shares_expression_basis(small_model, bespoke_model):
    assert bespoke_model.expression_basis is small_model.expression_basis
    assert bespoke_model.n_id == 8
    with pytest.raises(TooManyComponents):
        generate_bespoke_model(small_model, seed=1, tag="t", n_id=small_model.n_id + 1)
