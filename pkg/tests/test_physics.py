import numpy as np
import pytest

from sbpcht.geometry import FaceGeometry
from sbpcht.physics import (
    LinearDebugSolution,
    ManufacturedSolution,
    PdeParams,
    boundary_data,
    coupled_error,
    mms_eval,
    mms_sources,
    p_norm_error,
    robin_coefficient,
)


def test_params_validation():
    with pytest.raises(ValueError):
        PdeParams(epsilon=0.0)
    with pytest.raises(ValueError):
        PdeParams(kappa=-1.0)
    with pytest.raises(ValueError):
        PdeParams(advection=(1.0, 0.0))  # normal advection at the interface
    assert PdeParams(phi_mode="kappa", kappa=3.0).phi == 3.0
    assert PdeParams(phi_mode=2.5).phi == 2.5


def test_robin_coefficient_upwind_and_constant():
    lam = np.array([-2.0, 0.0, 1.5])
    up = robin_coefficient(PdeParams(), lam)
    assert np.allclose(up, [2.0, 0.0, 0.0])
    const = robin_coefficient(PdeParams(zeta_mode=0.7), lam)
    assert np.allclose(const, 0.7)


def test_mms_interface_values_vanish():
    sol = ManufacturedSolution(PdeParams())
    y = np.linspace(-1.0, 1.0, 7)
    w = sol.value("L", (np.zeros_like(y), y), 0.3)
    assert np.abs(w).max() == 0.0


def test_mms_point_value():
    sol = ManufacturedSolution(PdeParams(epsilon=1.0))
    w = sol.value("L", (np.array([1.0]), np.array([0.0])), 0.0)
    assert w[0] == pytest.approx(np.sin(1.0), abs=1e-15)


def test_mms_prefactor_scaling():
    p1 = ManufacturedSolution(PdeParams(epsilon=1.0))
    p2 = ManufacturedSolution(PdeParams(epsilon=2.0))
    pts = (np.array([0.3, -0.7]), np.array([0.2, 0.9]))
    assert np.allclose(p2.value("L", pts, 1.3), 0.5 * p1.value("L", pts, 1.3))


def test_mms_eval_wrapper():
    sol = ManufacturedSolution(PdeParams())
    w, v = mms_eval(sol, 0.0, (np.array([0.0]), np.array([0.4])), (np.array([0.0]), np.array([0.4])))
    assert w[0] == 0.0 and v[0] == 0.0


def test_interface_conditions_hold_identically(rng):
    # both the value jump and the conductivity-weighted flux jump vanish at x=0
    params = PdeParams(epsilon=2.0, kappa=5.0)
    sol = ManufacturedSolution(params)
    y = rng.uniform(-1.0, 1.0, 50)
    t = rng.uniform(0.0, 2.0, 50)
    for yi, ti in zip(y, t):
        pt = (np.array([0.0]), np.array([yi]))
        w = sol.value("L", pt, ti)[0]
        v = sol.value("R", pt, ti)[0]
        assert abs(w - v) <= 1e-14
        dw = sol.gradient("L", pt, ti)[0, 0]
        dv = sol.gradient("R", pt, ti)[0, 0]
        assert abs(params.epsilon * dw - params.kappa * dv) <= 1e-14


def _fd_oracle(fun, x, y, t, h=1e-2):
    """Sixth-order central differences for first/second space derivatives."""
    w = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    w2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
    offs = np.arange(-3, 4)
    fx = sum(wi * fun(x + o * h, y, t) for wi, o in zip(w, offs)) / h
    fy = sum(wi * fun(x, y + o * h, t) for wi, o in zip(w, offs)) / h
    fxx = sum(wi * fun(x + o * h, y, t) for wi, o in zip(w2, offs)) / h**2
    fyy = sum(wi * fun(x, y + o * h, t) for wi, o in zip(w2, offs)) / h**2
    ft = sum(wi * fun(x, y, t + o * h) for wi, o in zip(w, offs)) / h
    return ft, fx, fy, fxx + fyy


@pytest.mark.parametrize("side", ["L", "R"])
def test_sources_match_finite_difference_oracle(side, rng):
    params = PdeParams(epsilon=1.3, kappa=0.7, advection=(0.0, 1.1))
    sol = ManufacturedSolution(params)

    def fun(x, y, t):
        return sol.value(side, (np.asarray(x, dtype=float), np.asarray(y, dtype=float)), t)

    pts = rng.uniform(-1.0, 1.0, (1000, 3)) * np.array([1.0, 1.0, 1.0]) + np.array([0.0, 0.0, 1.0])
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    ft, fx, fy, lap = _fd_oracle(fun, x, y, t)
    nu = params.epsilon if side == "L" else params.kappa
    if side == "L":
        expected = ft + params.advection[1] * fy - nu * lap
    else:
        expected = ft - nu * lap
    got = sol.source(side, (x, y), t)
    scale = np.abs(expected).max()
    assert np.abs(got - expected).max() <= 1e-7 * max(1.0, scale)


def test_source_compatibility_at_interface(rng):
    # the two sources agree on the interface line for any eps, kappa
    params = PdeParams(epsilon=2.0, kappa=30.0, advection=(0.0, 2.0))
    sol = ManufacturedSolution(params)
    y = rng.uniform(-1.0, 1.0, 100)
    t = rng.uniform(0.0, 2.0, 100)
    fl = sol.source("L", (np.zeros_like(y), y), t)
    fr = sol.source("R", (np.zeros_like(y), y), t)
    assert np.abs(fl - fr).max() <= 1e-10 * max(1.0, np.abs(fl).max())


def test_debug_solution_pure_time_term():
    sol = LinearDebugSolution(PdeParams(), base=1.0, rate=2.0)
    pts = (np.array([0.1, 0.5]), np.array([-0.3, 0.2]))
    assert np.allclose(sol.source("L", pts, 0.7), 2.0)
    assert np.allclose(sol.value("L", pts, 0.5), 2.0)


def test_boundary_data_consistency_with_discrete_normals():
    params = PdeParams(epsilon=1.5)
    sol = ManufacturedSolution(params)
    y = np.linspace(-1.0, 1.0, 5)
    face = FaceGeometry(
        axis=0,
        side="lo",
        surf_jac=np.ones(5),
        normal=np.stack([-np.ones(5), np.zeros(5)]),
        lam=np.zeros(5),
        coords=np.stack([-np.ones(5), y]),
    )
    g = boundary_data(sol, params, "L", face, 0.4)
    grad = sol.gradient("L", (face.coords[0], face.coords[1]), 0.4)
    assert np.allclose(g, -params.epsilon * grad[0], atol=1e-14)


def test_p_norm_error_trivial_cases():
    mass = np.array([0.5, 1.0, 0.5])
    assert p_norm_error([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], mass) == 0.0
    # single nonzero entry delta at node j: error = sqrt(mass_j) |delta|
    e = p_norm_error([0.0, 0.25, 0.0], [0.0, 0.0, 0.0], mass)
    assert e == pytest.approx(np.sqrt(1.0) * 0.25, abs=1e-15)


def test_p_norm_constant_error_integrates_area():
    from sbpcht.geometry import AffineMap, compute_metrics, eval_mapping
    from sbpcht.sbp import build_tensor_ops

    ops = build_tensor_ops(2, (12, 12))
    m = compute_metrics(eval_mapping(AffineMap(lo=(0.0, 0.0), hi=(1.0, 1.0)), ops), ops)
    mass = m.jac * ops.vol_weights
    c = 0.37
    err = p_norm_error(np.full(ops.nnodes, c), np.zeros(ops.nnodes), mass)
    assert err == pytest.approx(c, rel=1e-12)


def test_coupled_error_combines_sides():
    mass = np.ones(2)
    err = coupled_error([1.0, 0.0], [0.0, 0.0], mass, [0.0, 1.0], [0.0, 0.0], mass)
    assert err == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_mms_sources_wrapper():
    sol = ManufacturedSolution(PdeParams())
    pts = (np.array([0.5]), np.array([0.5]))
    fl, fr = mms_sources(sol, 0.0, pts, pts)
    assert np.isfinite(fl).all() and np.isfinite(fr).all()
