import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facemirror.bvls import solve_box_lsq
from facemirror.errors import SolverNonConvergence

from oracles import box_qp_projected_gradient, kkt_conditions_hold


def random_instance(rng, m=40, n=8, ridge=0.0):
    a = rng.standard_normal((m, n))
    x_true = rng.standard_normal(n)
    b = a @ x_true + 0.1 * rng.standard_normal(m)
    bounds = rng.uniform(0.2, 1.5, size=n)
    return a, b, -bounds, bounds, ridge


def test_unconstrained_solution_inside_box_is_returned():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((30, 5))
    x_true = 0.05 * rng.standard_normal(5)
    b = a @ x_true
    res = solve_box_lsq(a, b, -np.ones(5), np.ones(5))
    assert np.max(np.abs(res.x - x_true)) < 1e-10
    assert not res.on_bound.any()


def test_matches_projected_gradient_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        a, b, lo, up, ridge = random_instance(rng, ridge=float(rng.uniform(0, 0.5)))
        got = solve_box_lsq(a, b, lo, up, ridge=ridge).x
        want = box_qp_projected_gradient(a, b, lo, up, ridge=ridge, tol=1e-13)
        assert np.max(np.abs(got - want)) < 1e-8


def test_kkt_certificate_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(25):
        a, b, lo, up, ridge = random_instance(rng)
        res = solve_box_lsq(a, b, lo, up, ridge=ridge)
        assert kkt_conditions_hold(a, b, lo, up, res.x, ridge=ridge)
        assert np.all(res.x >= lo - 1e-12) and np.all(res.x <= up + 1e-12)


def test_constrained_residual_dominates_unconstrained():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b, lo, up, _ = random_instance(rng)
        x_c = solve_box_lsq(a, b, lo, up).x
        x_u, *_ = np.linalg.lstsq(a, b, rcond=None)
        assert np.linalg.norm(a @ x_c - b) >= np.linalg.norm(a @ x_u - b) - 1e-12


def test_out_of_box_target_lands_on_boundary():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((60, 6))
    bounds = np.ones(6)
    x_true = np.array([2.0, -3.0, 0.2, 0.1, -0.3, 0.0])
    b = a @ x_true
    res = solve_box_lsq(a, b, -bounds, bounds)
    assert res.x[0] == pytest.approx(1.0, abs=1e-12)
    assert res.x[1] == pytest.approx(-1.0, abs=1e-12)
    assert res.on_bound[0] == 1 and res.on_bound[1] == -1


def test_zero_columns_and_tight_budget():
    res = solve_box_lsq(np.zeros((4, 0)), np.ones(4), np.zeros(0), np.zeros(0))
    assert res.x.shape == (0,)
    rng = np.random.default_rng(11)
    a, b, lo, up, _ = random_instance(rng, n=12)
    with pytest.raises(SolverNonConvergence):
        solve_box_lsq(a, b, lo, up, max_iter=1)


def test_ridge_shrinks_toward_zero():
    rng = np.random.default_rng(13)
    a, b, lo, up, _ = random_instance(rng)
    x_plain = solve_box_lsq(a, b, lo, up).x
    x_ridge = solve_box_lsq(a, b, lo, up, ridge=1e3).x
    assert np.linalg.norm(x_ridge) < np.linalg.norm(x_plain)


def test_degenerate_zero_width_box():
    rng = np.random.default_rng(17)
    a = rng.standard_normal((20, 4))
    b = rng.standard_normal(20)
    fixed = np.array([0.3, -0.2, 0.1, 0.0])
    res = solve_box_lsq(a, b, fixed, fixed)
    assert np.array_equal(res.x, fixed)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       n=st.integers(1, 10),
       ridge=st.floats(0.0, 1.0, allow_nan=False))
def test_solution_always_feasible_and_kkt(seed, n, ridge):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3 * n + 5, n))
    b = rng.standard_normal(3 * n + 5) * 2.0
    bounds = rng.uniform(0.05, 1.0, size=n)
    res = solve_box_lsq(a, b, -bounds, bounds, ridge=ridge)
    assert np.all(np.abs(res.x) <= bounds + 1e-12)
    assert kkt_conditions_hold(a, b, -bounds, bounds, res.x, ridge=ridge)
