import numpy as np
import pytest

from sbpcht.sbp import (
    MIN_NODES,
    build_sbp_1d,
    build_tensor_ops,
    extend_to_axis,
    second_derivative_decomposition_check,
)

COARSEST = {1: 5, 2: 9, 3: 13}


def test_p1_n3_hand_derived_values():
    # h = 1/2: norm (h/2, h, h/2), first derivative row (-1/h, 1/h, 0)
    op = build_sbp_1d(1, 3, 0.0, 1.0)
    assert np.allclose(op.weights, [0.25, 0.5, 0.25], atol=1e-15)
    assert np.allclose(op.diff[0], [-2.0, 2.0, 0.0], atol=1e-13)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_constant_annihilation(degree):
    op = build_sbp_1d(degree, COARSEST[degree] + 4, -1.0, 2.0)
    assert np.abs(op.diff @ np.ones(op.n)).max() <= 1e-12


def test_p2_differentiates_quadratic_exactly():
    op = build_sbp_1d(2, 9, 0.0, 1.0)
    x = op.nodes
    assert np.abs(op.diff @ x**2 - 2 * x).max() <= 1e-12


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_accuracy_on_random_grids(degree, rng):
    for _ in range(20):
        n = int(rng.integers(MIN_NODES[degree], MIN_NODES[degree] + 40))
        lo = float(rng.uniform(-2.0, 1.0))
        hi = lo + float(rng.uniform(0.5, 3.0))
        op = build_sbp_1d(degree, n, lo, hi)
        scale = max(1.0, np.abs(op.nodes).max())
        for r in range(1, degree + 1):
            err = np.abs(op.diff @ op.nodes**r - r * op.nodes ** (r - 1)).max()
            assert err <= 1e-11 * scale**r


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_sbp_property_and_positive_norm(degree):
    for n in (COARSEST[degree], COARSEST[degree] + 7):
        op = build_sbp_1d(degree, n, 0.0, 2.0)
        assert np.abs(op.qmat + op.qmat.T - op.emat).max() <= 1e-13
        assert op.weights.min() > 0.0


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_quadrature_integrates_constants(degree):
    op = build_sbp_1d(degree, COARSEST[degree] + 3, -0.5, 1.75)
    assert abs(op.weights.sum() - 2.25) <= 1e-13


@pytest.mark.parametrize("degree,n", [(1, 10), (2, 18), (3, 26)])
def test_second_derivative_decomposition(degree, n):
    op = build_sbp_1d(degree, n, 0.0, 1.0)
    tol = 1e-13 if degree == 1 else 1e-12
    assert second_derivative_decomposition_check(op) <= tol


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_minimum_node_count_enforced(degree):
    with pytest.raises(ValueError):
        build_sbp_1d(degree, MIN_NODES[degree] - 1, 0.0, 1.0)


def test_coarsest_study_grids_accepted():
    for degree, n in COARSEST.items():
        op = build_sbp_1d(degree, n, 0.0, 1.0)
        assert op.n == n


def test_invalid_degree_and_domain():
    with pytest.raises(ValueError):
        build_sbp_1d(4, 30, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_sbp_1d(1, 5, 1.0, 1.0)


def test_tensor_linear_exactness():
    ops = build_tensor_ops(1, (8, 6))
    xi, eta = ops.grids()
    d0 = ops.deriv(0) @ xi.ravel()
    assert np.abs(d0 - 1.0).max() <= 1e-12


def test_tensor_cross_axis_annihilation():
    ops = build_tensor_ops(1, (8, 6))
    _, eta = ops.grids()
    d0 = ops.deriv(0) @ eta.ravel()
    assert np.abs(d0).max() <= 1e-12


def test_tensor_mixed_monomial_derivative():
    ops = build_tensor_ops(2, (12, 11))
    xi, eta = ops.grids()
    f = (xi**2 * eta**2).ravel()
    expect = (2 * xi * eta**2).ravel()
    assert np.abs(ops.deriv(0) @ f - expect).max() <= 1e-11


def test_tensor_directional_derivatives_commute(rng):
    ops = build_tensor_ops(2, (10, 9))
    u = rng.standard_normal(ops.nnodes)
    d01 = ops.deriv(0) @ (ops.deriv(1) @ u)
    d10 = ops.deriv(1) @ (ops.deriv(0) @ u)
    assert np.abs(d01 - d10).max() <= 1e-12 * max(1.0, np.abs(u).max())


def test_restriction_is_bit_exact_selection(rng):
    ops = build_tensor_ops(1, (5, 4))
    u = rng.standard_normal(ops.nnodes)
    grid = u.reshape(5, 4)
    assert np.array_equal(ops.restrict(0, "hi") @ u, grid[-1, :])
    assert np.array_equal(ops.restrict(0, "lo") @ u, grid[0, :])
    assert np.array_equal(ops.restrict(1, "hi") @ u, grid[:, -1])


def test_surface_operator_matches_sbp_identity(rng):
    # P D_l + (P D_l)^T must equal the directional surface operator
    ops = build_tensor_ops(2, (10, 9))
    pbar = ops.vol_weights
    for axis in range(2):
        q = (pbar[:, None] * ops.deriv(axis).toarray())
        e = ops.surface_operator(axis).toarray()
        assert np.abs(q + q.T - e).max() <= 1e-13


def test_extend_to_axis_matches_tensor_set():
    ops = build_tensor_ops(2, (9, 10))
    d, rlo, rhi, pperp = extend_to_axis(ops.axes[1], 1, (9, 10))
    assert np.abs((d - ops.deriv(1)).toarray()).max() == 0.0
    assert np.array_equal(pperp, ops.perp_weights(1))
    assert (rlo != ops.restrict(1, "lo")).nnz == 0
    assert (rhi != ops.restrict(1, "hi")).nnz == 0


def test_extend_to_axis_dimension_mismatch():
    ops = build_tensor_ops(2, (9, 10))
    with pytest.raises(ValueError):
        extend_to_axis(ops.axes[0], 2, (9, 10))
    with pytest.raises(ValueError):
        extend_to_axis(ops.axes[0], 1, (9, 10))
