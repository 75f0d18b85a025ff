"""Coordinate mappings, metric terms, and discrete trace constants.

Metric terms are built by SBP differentiation of the nodal physical
coordinates using the analytic cofactor inversion (in 2D,
J dxi/dx = D_eta y and so on).  Tensor-operator commutation then satisfies
the discrete metric identities to machine precision.  In 3D only per-axis
(tensor-affine) mappings are supported, for which the identities are
trivially exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sbp import TensorOperatorSet

__all__ = [
    "GeometryError",
    "Mapping",
    "AffineMap",
    "PerturbedBoxMap",
    "interior_perturbed_map",
    "mapping_from_name",
    "eval_mapping",
    "FaceGeometry",
    "Metrics",
    "compute_metrics",
    "TraceConstants",
    "trace_constant",
]

#: Amplitude of the built-in interior grid perturbation.
PERTURBATION = 1.0 / 32.0


class GeometryError(ValueError):
    """Invalid geometry: non-positive Jacobian, dimension mismatch, ..."""


def interior_perturbed_map(xi, eta):
    """Interior-perturbed unit-square map; edges stay straight and uniform.

    Both output coordinates run from 1 to 0 as the reference coordinate runs
    from 0 to 1; the second coordinate is evaluated from the already-mapped
    first one, so evaluation order fixed: x first, then y.
    """
    x = 1.0 - xi - PERTURBATION * np.cos(np.pi * (xi - 0.5)) * np.cos(3.0 * np.pi * (eta - 0.5))
    y = 1.0 - eta - PERTURBATION * np.sin(4.0 * np.pi * (x - 0.5)) * np.cos(np.pi * (eta - 0.5))
    return x, y


class Mapping:
    """Fixed (time-independent) map from the reference box to the domain."""

    ndim: int

    def __call__(self, *ref_coords):
        raise NotImplementedError


@dataclass(frozen=True)
class AffineMap(Mapping):
    """Per-axis affine map: axis i sends reference 0 -> lo[i], 1 -> hi[i].

    ``hi[i] < lo[i]`` reverses the axis orientation.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def ndim(self) -> int:
        return len(self.lo)

    def __call__(self, *ref_coords):
        if len(ref_coords) != self.ndim:
            raise GeometryError(f"expected {self.ndim} coordinates, got {len(ref_coords)}")
        return tuple(
            lo + (hi - lo) * np.asarray(c, dtype=float)
            for c, lo, hi in zip(ref_coords, self.lo, self.hi)
        )


@dataclass(frozen=True)
class PerturbedBoxMap(Mapping):
    """2D curvilinear block: interior-perturbed unit square scaled to a box.

    ``lo``/``hi`` are the images of raw output 0 and 1 per axis.  With
    ``flip_x`` the first reference coordinate is reversed before evaluating
    the raw map, which is how the right neighbour of an interface obtains a
    node distribution conforming with the left block.
    """

    lo: tuple[float, float]
    hi: tuple[float, float]
    flip_x: bool = False

    @property
    def ndim(self) -> int:
        return 2

    def __call__(self, *ref_coords):
        if len(ref_coords) != 2:
            raise GeometryError("PerturbedBoxMap is two-dimensional")
        xi = np.asarray(ref_coords[0], dtype=float)
        eta = np.asarray(ref_coords[1], dtype=float)
        if self.flip_x:
            xi = 1.0 - xi
        xr, yr = interior_perturbed_map(xi, eta)
        return (
            self.lo[0] + (self.hi[0] - self.lo[0]) * xr,
            self.lo[1] + (self.hi[1] - self.lo[1]) * yr,
        )


def mapping_from_name(name: str, lo, hi, flip_x: bool = False) -> Mapping:
    """Mapping factory for run configurations."""
    lo = tuple(float(v) for v in lo)
    hi = tuple(float(v) for v in hi)
    kind = name.strip().lower()
    if kind in ("identity", "affine", "cartesian"):
        return AffineMap(lo=lo, hi=hi)
    if kind in ("curvilinear", "perturbed"):
        if len(lo) != 2:
            raise GeometryError("curvilinear mapping is only available in 2D")
        return PerturbedBoxMap(lo=lo, hi=hi, flip_x=flip_x)
    raise GeometryError(f"unknown mapping '{name}'")


def eval_mapping(mapping: Mapping, ops: TensorOperatorSet):
    """Physical node coordinates (one flat array per axis) for a tensor grid."""
    ref = ops.grids()
    if len(ref) != mapping.ndim:
        raise GeometryError(
            f"mapping is {mapping.ndim}-dimensional but grid is {len(ref)}-dimensional"
        )
    phys = mapping(*ref)
    return [np.asarray(c, dtype=float).ravel() for c in phys]


@dataclass
class FaceGeometry:
    """Per-face surface data: Jacobian, outward normal, advection speed."""

    axis: int
    side: str                 # "lo" (alpha) or "hi" (beta)
    surf_jac: np.ndarray      # face-node surface Jacobian diagonal
    normal: np.ndarray        # (d, nface) outward unit normal components
    lam: np.ndarray           # a . n per face node (normal advection diagonal)
    coords: np.ndarray        # (d, nface) physical coordinates of face nodes


@dataclass
class Metrics:
    """Per-subdomain curvilinear geometry in diagonal (nodal) form."""

    ndim: int
    jac: np.ndarray                       # metric Jacobian per node
    jdxi: dict                            # (l, m) -> J * d xi_l / d x_m per node
    cdiag: dict                           # (l, a) -> contravariant diffusion diagonal
    faces: dict                           # (axis, side) -> FaceGeometry
    coords: list                          # physical coordinates per axis (flat)

    def metric_identity_residual(self, ops: TensorOperatorSet) -> float:
        """max_m || sum_l D_l [J dxi_l/dx_m] 1 ||_inf."""
        worst = 0.0
        for m in range(self.ndim):
            acc = np.zeros(self.jac.size)
            for l in range(self.ndim):
                acc += ops.deriv(l) @ self.jdxi[(l, m)]
            worst = max(worst, float(np.abs(acc).max()))
        return worst


def _metric_arrays(coords, ops: TensorOperatorSet):
    d = ops.ndim
    if d == 1:
        x = coords[0]
        jac = ops.deriv(0) @ x
        return jac, {(0, 0): np.ones_like(jac)}
    if d == 2:
        x, y = coords
        x_xi = ops.deriv(0) @ x
        x_eta = ops.deriv(1) @ x
        y_xi = ops.deriv(0) @ y
        y_eta = ops.deriv(1) @ y
        jac = x_xi * y_eta - x_eta * y_xi
        jdxi = {(0, 0): y_eta, (0, 1): -x_eta, (1, 0): -y_xi, (1, 1): x_xi}
        return jac, jdxi
    if d == 3:
        # restricted to per-axis maps: the Jacobian matrix must be diagonal
        stretch = []
        for l in range(3):
            for m in range(3):
                g = ops.deriv(m) @ coords[l]
                if l != m and np.abs(g).max() > 1e-12 * max(1.0, np.abs(coords[l]).max()):
                    raise GeometryError(
                        "3D mappings are restricted to per-axis (tensor-affine) maps"
                    )
            stretch.append(ops.deriv(l) @ coords[l])
        jac = stretch[0] * stretch[1] * stretch[2]
        jdxi = {}
        for l in range(3):
            for m in range(3):
                jdxi[(l, m)] = jac / stretch[l] if l == m else np.zeros_like(jac)
        return jac, jdxi
    raise GeometryError(f"unsupported dimension {d}")


def compute_metrics(coords, ops: TensorOperatorSet, advection=None) -> Metrics:
    """Metric Jacobian, metric terms, diffusion diagonals, and face data.

    ``coords`` holds the physical coordinates per axis (flat, in grid
    order); ``advection`` feeds the per-face normal-advection diagonals.
    """
    d = ops.ndim
    coords = [np.asarray(c, dtype=float).ravel() for c in coords]
    if len(coords) != d:
        raise GeometryError(f"expected {d} coordinate arrays, got {len(coords)}")
    if advection is None:
        advection = np.zeros(d)
    advection = np.asarray(advection, dtype=float)

    jac, jdxi = _metric_arrays(coords, ops)
    if jac.min() <= 0.0:
        bad = int(np.argmin(jac))
        raise GeometryError(f"non-positive metric Jacobian {jac[bad]:.3e} at node {bad}")

    cdiag = {}
    for l in range(d):
        for a in range(l, d):
            val = sum(jdxi[(l, m)] * jdxi[(a, m)] for m in range(d)) / jac
            cdiag[(l, a)] = val
            cdiag[(a, l)] = val  # same array: symmetric bit-exactly

    faces = {}
    for axis in range(d):
        for side, sgn in (("lo", -1.0), ("hi", 1.0)):
            rmat = ops.restrict(axis, side)
            comp = np.stack([rmat @ jdxi[(axis, m)] for m in range(d)])
            surf_jac = np.sqrt((comp**2).sum(axis=0))
            if surf_jac.min() <= 0.0:
                raise GeometryError(f"degenerate face ({axis}, {side})")
            normal = sgn * comp / surf_jac
            lam = advection @ normal
            fcoords = np.stack([rmat @ c for c in coords])
            faces[(axis, side)] = FaceGeometry(
                axis=axis, side=side, surf_jac=surf_jac, normal=normal, lam=lam, coords=fcoords
            )
    return Metrics(ndim=d, jac=jac, jdxi=jdxi, cdiag=cdiag, faces=faces, coords=coords)


@dataclass(frozen=True)
class TraceConstants:
    """Constants of the discrete trace inequality for one subdomain.

    ``rho`` bounds face-norm energy by volume-norm energy:
    ||R z||^2_(Jhat Pperp) <= ||z||^2_(J P) / rho for every face.
    """

    rho_vol: float            # min over nodes of the J-weighted volume norm
    rho_face: dict            # (axis, side) -> max over face of Jhat-weighted face norm
    rho: float

    def bound_factor(self) -> float:
        return 1.0 / self.rho


def trace_constant(metrics: Metrics, ops: TensorOperatorSet) -> TraceConstants:
    """Evaluate the trace constants from the assembled diagonal norms."""
    rho_vol = float((metrics.jac * ops.vol_weights).min())
    rho_face = {}
    for key, face in metrics.faces.items():
        axis = key[0]
        rho_face[key] = float((face.surf_jac * ops.perp_weights(axis)).max())
    rho = rho_vol / max(rho_face.values())
    return TraceConstants(rho_vol=rho_vol, rho_face=rho_face, rho=rho)
