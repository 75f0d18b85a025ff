"""Discrete spatial operators for the coupled problem.

Builds, per subdomain, the skew-split advection + conservative diffusion
interior operator, Robin boundary penalties with their data-injection maps,
and the interface penalties split into a self block (acting on the
subdomain's own new solution) and a neighbour block (acting on the lagged or
extrapolated interface source).  Everything is assembled in the
"mass-matrix form": M_J du/dt = A_self u + A_neighbour u_other + data,
with M_J the diagonal metric Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError, Metrics, TraceConstants, trace_constant
from .physics import PdeParams, robin_coefficient
from .sbp import TensorOperatorSet

__all__ = [
    "SatParams",
    "Subdomain",
    "make_subdomain",
    "assemble_interior",
    "assemble_boundary_sat",
    "interface_trace_ops",
    "assemble_interface_sats",
    "SubdomainOperator",
    "CoupledBlocks",
    "build_coupled_blocks",
    "assemble_monolithic",
]

#: Conforming-interface tolerance on node positions and surface Jacobians.
INTERFACE_TOL = 1e-10


@dataclass(frozen=True)
class SatParams:
    """Interface penalty strengths.

    The solution-continuity penalty is shared (gamma1 equal on both sides);
    the flux-continuity penalties may differ per side.
    """

    gamma1: float
    gamma2_left: float = 0.0
    gamma2_right: float = 0.0

    def __post_init__(self):
        if self.gamma1 < 0.0 or self.gamma2_left < 0.0 or self.gamma2_right < 0.0:
            raise ValueError("SAT parameters must be nonnegative")

    @property
    def gamma2_min(self) -> float:
        return min(self.gamma2_left, self.gamma2_right)

    @property
    def gamma2_max(self) -> float:
        return max(self.gamma2_left, self.gamma2_right)

    @property
    def gamma2_gap(self) -> float:
        return abs(self.gamma2_left - self.gamma2_right)

    def gamma2(self, side: str) -> float:
        return self.gamma2_left if side == "L" else self.gamma2_right


@dataclass
class Subdomain:
    """Geometry bundle for one side of the interface."""

    side: str                      # "L" or "R"
    ops: TensorOperatorSet
    metrics: Metrics
    traces: TraceConstants

    @property
    def nnodes(self) -> int:
        return self.ops.nnodes

    @property
    def jac(self) -> np.ndarray:
        return self.metrics.jac

    @property
    def norm_diag(self) -> np.ndarray:
        """Diagonal of the J-weighted volume norm defining the energy."""
        return self.metrics.jac * self.ops.vol_weights

    @property
    def interface_key(self):
        # fixed orientation: the left block's high-xi1 face meets the right
        # block's low-xi1 face
        return (0, "hi") if self.side == "L" else (0, "lo")

    @property
    def physical_faces(self):
        return [key for key in self.metrics.faces if key != self.interface_key]

    def pbar_inv(self) -> sp.dia_matrix:
        return sp.diags(1.0 / self.ops.vol_weights)


def make_subdomain(side: str, ops: TensorOperatorSet, metrics: Metrics) -> Subdomain:
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    return Subdomain(side=side, ops=ops, metrics=metrics, traces=trace_constant(metrics, ops))


def assemble_interior(sub: Subdomain, params: PdeParams) -> sp.csr_matrix:
    """Volume operator: skew-split advection (left only) plus diffusion.

    Diffusion is the conservative wide-stencil form sum_l,a D_l C_la D_a
    scaled by the side's conductivity; the advective split
    -(1/2) sum a_m (D_l M_lm + M_lm D_l) preserves free streams through the
    discrete metric identities.
    """
    ops, metrics = sub.ops, sub.metrics
    d = ops.ndim
    nu = params.epsilon if sub.side == "L" else params.kappa
    out = None
    for l in range(d):
        dl = ops.deriv(l)
        for a in range(d):
            term = nu * (dl @ sp.diags(metrics.cdiag[(l, a)]) @ ops.deriv(a))
            out = term if out is None else out + term
    if sub.side == "L":
        for l in range(d):
            dl = ops.deriv(l)
            for m in range(d):
                am = params.advection[m] if m < len(params.advection) else 0.0
                if am == 0.0:
                    continue
                md = sp.diags(metrics.jdxi[(l, m)])
                out = out - 0.5 * am * (dl @ md + md @ dl)
    return out.tocsr()


def assemble_boundary_sat(sub: Subdomain, face_key, params: PdeParams):
    """Penalty matrix and data-injection map for one physical face.

    Left faces impose the Robin condition zeta w + eps n.grad w = g with the
    upwind coefficient taken from the face's normal advection diagonal;
    right faces impose v + phi n.grad v = h with unit solution weight.
    Returns ``(matrix, injection)`` where ``matrix`` acts on the subdomain
    solution and ``injection @ data`` adds the boundary data each time level.
    """
    if face_key == sub.interface_key:
        raise GeometryError(f"face {face_key} is the interface, not a physical boundary")
    ops, metrics = sub.ops, sub.metrics
    face = metrics.faces[face_key]
    axis, side = face_key
    rmat = ops.restrict(axis, side)
    pperp = sp.diags(ops.perp_weights(axis))
    sj = sp.diags(face.surf_jac)
    flux_sign = 1.0 if side == "hi" else -1.0

    flux = None
    for a in range(ops.ndim):
        term = rmat @ sp.diags(metrics.cdiag[(axis, a)]) @ ops.deriv(a)
        flux = term if flux is None else flux + term

    pinv = sub.pbar_inv()
    if sub.side == "L":
        coef = sp.diags(robin_coefficient(params, face.lam))
        nu = params.epsilon
    else:
        coef = sp.identity(face.lam.size, format="csr")
        nu = params.phi
    matrix = -pinv @ (rmat.T @ (coef @ sj @ pperp) @ rmat + flux_sign * nu * (rmat.T @ pperp @ flux))
    injection = pinv @ rmat.T @ (sj @ pperp)
    return matrix.tocsr(), injection.tocsr()


def interface_trace_ops(sub: Subdomain, params: PdeParams):
    """Solution and conductivity-weighted flux traces on the interface face.

    The flux trace of the exact solution equals the surface-Jacobian-scaled
    outward normal flux for the left block and its negative for the right,
    which is what makes the flux-continuity penalties consistent.
    """
    ops, metrics = sub.ops, sub.metrics
    axis, side = sub.interface_key
    rmat = ops.restrict(axis, side)
    nu = params.epsilon if sub.side == "L" else params.kappa
    flux = None
    for a in range(ops.ndim):
        term = rmat @ sp.diags(metrics.cdiag[(axis, a)]) @ ops.deriv(a)
        flux = term if flux is None else flux + term
    return rmat.tocsr(), (nu * flux).tocsr()


def assemble_interface_sats(sub: Subdomain, other: Subdomain, sat: SatParams, params: PdeParams):
    """Interface penalties for one side, split into self and neighbour blocks.

    The left side carries the solution-continuity and flux-continuity
    penalties; the right side additionally carries the untuned flux-transfer
    term (coefficient exactly one) that hands the left flux to the right
    subdomain.  Both blocks are returned in mass-matrix form.
    """
    _check_conforming(sub, other)
    r_own, f_own = interface_trace_ops(sub, params)
    r_oth, f_oth = interface_trace_ops(other, params)
    axis = sub.interface_key[0]
    face = sub.metrics.faces[sub.interface_key]
    pperp = sp.diags(sub.ops.perp_weights(axis))
    sj = sp.diags(face.surf_jac)
    sj_inv = sp.diags(1.0 / face.surf_jac)
    pinv = sub.pbar_inv()
    g2 = sat.gamma2(sub.side)

    self_block = -sat.gamma1 * (pinv @ r_own.T @ (sj @ pperp) @ r_own)
    self_block = self_block - g2 * (pinv @ f_own.T @ (sj_inv @ pperp) @ f_own)
    neighbour = sat.gamma1 * (pinv @ r_own.T @ (sj @ pperp) @ r_oth)
    neighbour = neighbour + g2 * (pinv @ f_own.T @ (sj_inv @ pperp) @ f_oth)
    if sub.side == "R":
        self_block = self_block + pinv @ r_own.T @ pperp @ f_own
        neighbour = neighbour - pinv @ r_own.T @ pperp @ f_oth
    return self_block.tocsr(), neighbour.tocsr()


def _check_conforming(sub: Subdomain, other: Subdomain) -> None:
    fa = sub.metrics.faces[sub.interface_key]
    fb = other.metrics.faces[other.interface_key]
    if fa.surf_jac.size != fb.surf_jac.size:
        raise GeometryError("interface face grids are non-conforming (node counts differ)")
    if np.abs(fa.coords - fb.coords).max() > INTERFACE_TOL:
        raise GeometryError("interface face grids are non-conforming (node positions differ)")
    if np.abs(fa.surf_jac - fb.surf_jac).max() > INTERFACE_TOL:
        raise GeometryError("interface surface Jacobians differ between subdomains")


@dataclass
class SubdomainOperator:
    """All assembled matrices for one subdomain, in mass-matrix form."""

    side: str
    interior: sp.csr_matrix
    boundary: dict                    # face key -> penalty matrix
    injections: dict                  # face key -> data injection map
    iface_self: sp.csr_matrix
    iface_neighbour: sp.csr_matrix
    mass: np.ndarray                  # diagonal of M_J
    norm_diag: np.ndarray             # diagonal of the J-weighted volume norm

    @property
    def a_self(self) -> sp.csr_matrix:
        out = self.interior + self.iface_self
        for mat in self.boundary.values():
            out = out + mat
        return out.tocsr()

    @property
    def a_neighbour(self) -> sp.csr_matrix:
        return self.iface_neighbour

    def dynamics(self) -> sp.csr_matrix:
        """M_J^-1 A_self: the plain ODE-form self dynamics."""
        return (sp.diags(1.0 / self.mass) @ self.a_self).tocsr()

    def coupling(self) -> sp.csr_matrix:
        """M_J^-1 A_neighbour: the plain ODE-form interface coupling."""
        return (sp.diags(1.0 / self.mass) @ self.iface_neighbour).tocsr()


@dataclass
class CoupledBlocks:
    """The assembled two-subdomain system consumed by steppers and analysis."""

    left: SubdomainOperator
    right: SubdomainOperator
    left_sub: Subdomain
    right_sub: Subdomain
    params: PdeParams
    sat: SatParams
    _iface: dict = field(default_factory=dict, repr=False)

    @property
    def sizes(self) -> tuple[int, int]:
        return self.left.mass.size, self.right.mass.size

    def subdomain(self, side: str) -> Subdomain:
        return self.left_sub if side == "L" else self.right_sub

    def operator(self, side: str) -> SubdomainOperator:
        return self.left if side == "L" else self.right

    def interface(self):
        """Interface trace operators and weights shared by both sides."""
        if not self._iface:
            r_l, f_l = interface_trace_ops(self.left_sub, self.params)
            r_r, f_r = interface_trace_ops(self.right_sub, self.params)
            face = self.left_sub.metrics.faces[self.left_sub.interface_key]
            pperp = self.left_sub.ops.perp_weights(0)
            self._iface = dict(
                restrict_left=r_l,
                restrict_right=r_r,
                flux_left=f_l,
                flux_right=f_r,
                surf_jac=face.surf_jac,
                perp_weights=pperp,
            )
        return self._iface

    def interface_mismatch(self, w: np.ndarray, v: np.ndarray) -> float:
        """Surface-norm distance between the two interface solution traces."""
        ifc = self.interface()
        jump = ifc["restrict_left"] @ w - ifc["restrict_right"] @ v
        wgt = ifc["surf_jac"] * ifc["perp_weights"]
        return float(np.sqrt((jump * jump * wgt).sum()))


def build_coupled_blocks(
    left_sub: Subdomain, right_sub: Subdomain, params: PdeParams, sat: SatParams
) -> CoupledBlocks:
    """Assemble both subdomains against each other."""
    if left_sub.side != "L" or right_sub.side != "R":
        raise ValueError("subdomains must be built with sides 'L' and 'R'")
    ops = {}
    for sub, other in ((left_sub, right_sub), (right_sub, left_sub)):
        interior = assemble_interior(sub, params)
        boundary, injections = {}, {}
        for key in sub.physical_faces:
            mat, inj = assemble_boundary_sat(sub, key, params)
            boundary[key] = mat
            injections[key] = inj
        iself, ineigh = assemble_interface_sats(sub, other, sat, params)
        ops[sub.side] = SubdomainOperator(
            side=sub.side,
            interior=interior,
            boundary=boundary,
            injections=injections,
            iface_self=iself,
            iface_neighbour=ineigh,
            mass=sub.jac,
            norm_diag=sub.norm_diag,
        )
    return CoupledBlocks(
        left=ops["L"], right=ops["R"], left_sub=left_sub, right_sub=right_sub,
        params=params, sat=sat,
    )


def assemble_monolithic(blocks: CoupledBlocks, c: float) -> sp.csc_matrix:
    """Single implicit system (c M_J - A) with the coupling on the off-diagonals.

    Solving it advances both subdomains simultaneously, which is the fixed
    point of the partitioned sweep.
    """
    al, ar = blocks.left, blocks.right
    return sp.bmat(
        [
            [sp.diags(c * al.mass) - al.a_self, -al.a_neighbour],
            [-ar.a_neighbour, sp.diags(c * ar.mass) - ar.a_self],
        ],
        format="csc",
    )
