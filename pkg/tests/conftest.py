import numpy as np
import pytest

from sbpcht.assembly import SatParams, build_coupled_blocks, make_subdomain
from sbpcht.geometry import AffineMap, compute_metrics, eval_mapping
from sbpcht.physics import PdeParams
from sbpcht.problem import GeometryConfig, build_subdomains
from sbpcht.sbp import build_tensor_ops


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def build_1d_blocks(degree, n, params=None, sat=None, left=(0.0, 1.0), right=(1.0, 2.0)):
    """Coupled 1D problem: left on [0, sigma], right on [sigma, beta]."""
    params = params or PdeParams(advection=(0.0,))
    sat = sat or SatParams(gamma1=1.0)
    subs = []
    for side, (lo, hi) in (("L", left), ("R", right)):
        ops = build_tensor_ops(degree, (n,))
        coords = eval_mapping(AffineMap(lo=(lo,), hi=(hi,)), ops)
        metrics = compute_metrics(coords, ops, advection=params.advection)
        subs.append(make_subdomain(side, ops, metrics))
    return build_coupled_blocks(subs[0], subs[1], params, sat)


def build_2d_blocks(n, degree=2, map_name="cartesian", params=None, sat=None):
    params = params or PdeParams()
    sat = sat or SatParams(gamma1=1.0, gamma2_left=0.1, gamma2_right=0.1)
    geo = GeometryConfig(map=map_name, nx=n, ny=n, degree=degree)
    left_sub, right_sub = build_subdomains(geo, params)
    return build_coupled_blocks(left_sub, right_sub, params, sat)
