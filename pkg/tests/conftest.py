import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from facemirror.model import generate_bespoke_model, generate_synthetic_model


@pytest.fixture(scope="session")
def small_model():
    """Shared 500-vertex model with identity, expression and color bases."""
    return generate_synthetic_model(seed=1, n_vertices=500, n_id=10, n_expr=5,
                                    tag="global", n_color=3)


@pytest.fixture(scope="session")
def bespoke_model(small_model):
    return generate_bespoke_model(small_model, seed=7, tag="female-africa", n_id=8)


@pytest.fixture(scope="session")
def exact_bespoke(small_model):
    """Target model with a float64-orthonormal basis (no container rounding),
    for tests that probe the projection math at full precision."""
    from facemirror.model import MorphableModel
    rng = np.random.default_rng(42)
    n3 = 3 * small_model.n_vertices
    basis, _ = np.linalg.qr(rng.standard_normal((n3, 8)))
    return MorphableModel(
        n_vertices=small_model.n_vertices,
        mean_shape=small_model.mean_shape + rng.standard_normal(n3) * 0.01,
        identity_basis=basis,
        identity_sigma=np.geomspace(1.0, 0.02, 8),
        expression_basis=np.zeros((n3, 0)),
        expression_sigma=np.zeros(0),
        mean_color=None,
        color_basis=None,
        topology=small_model.topology,
        landmark_vertices=small_model.landmark_vertices,
        tag="target-exact",
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
