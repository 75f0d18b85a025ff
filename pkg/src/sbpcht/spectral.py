"""Time-iteration matrix of the partitioned scheme and its spectral radius.

For the first-order integrator with order-2 interface extrapolation and no
sub-iteration, one homogeneous step is a linear map on the stacked state
(current pair, previous pair).  Its spectral radius below one is necessary
and sufficient for asymptotic decay of perturbations, which is how the
penalty and step-size choices are assessed numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .assembly import CoupledBlocks

__all__ = [
    "IterationMatrix",
    "build_iteration_matrix",
    "spectral_radius",
    "SweepResult",
    "sweep",
]

#: dense analysis is restricted to desk scale
MAX_UNKNOWNS = 4000


@dataclass
class IterationMatrix:
    """Dense one-step propagator of the stacked partitioned state.

    ``prop_left``/``prop_right`` advance each subdomain alone under the
    implicit step; ``couple_left``/``couple_right`` carry the interface
    source.  ``matrix`` is the assembled block map whose last two block rows
    are the shift registers copying the current pair into the history slots.
    """

    dt: float
    prop_left: np.ndarray       # c (cI - A11)^-1
    couple_left: np.ndarray     # (cI - A11)^-1 A12
    prop_right: np.ndarray      # c (cI - A22)^-1
    couple_right: np.ndarray    # (cI - A22)^-1 A21
    matrix: np.ndarray
    sizes: tuple[int, int]

    @property
    def order(self) -> int:
        return self.matrix.shape[0]


def build_iteration_matrix(blocks: CoupledBlocks, dt: float) -> IterationMatrix:
    """Assemble the stacked-state propagator for the non-iterated scheme.

    Homogeneous setting (zero sources and boundary data); the grid must be
    small enough for dense inversion.
    """
    nl, nr = blocks.sizes
    if 2 * (nl + nr) > MAX_UNKNOWNS * 2:
        raise ValueError(
            f"iteration matrix has order {2 * (nl + nr)}; "
            f"dense analysis is limited to {2 * MAX_UNKNOWNS}"
        )
    c = 1.0 / dt
    a11 = blocks.left.dynamics().toarray()
    a12 = blocks.left.coupling().toarray()
    a22 = blocks.right.dynamics().toarray()
    a21 = blocks.right.coupling().toarray()

    try:
        prop_left = np.linalg.solve(c * np.eye(nl) - a11, c * np.eye(nl))
        couple_left = np.linalg.solve(c * np.eye(nl) - a11, a12)
        prop_right = np.linalg.solve(c * np.eye(nr) - a22, c * np.eye(nr))
        couple_right = np.linalg.solve(c * np.eye(nr) - a22, a21)
    except np.linalg.LinAlgError as exc:
        raise linalg.SingularMatrixError(f"implicit system is singular: {exc}") from exc

    z_ll = np.zeros((nl, nl))
    z_lr = np.zeros((nl, nr))
    z_rl = z_lr.T
    matrix = np.block(
        [
            [prop_left, 2.0 * couple_left, z_ll, -couple_left],
            [couple_right @ prop_left, 2.0 * couple_right @ couple_left + prop_right,
             z_rl, -couple_right @ couple_left],
            [np.eye(nl), z_lr, z_ll, z_lr],
            [z_rl, np.eye(nr), z_rl, np.zeros((nr, nr))],
        ]
    )
    return IterationMatrix(
        dt=dt,
        prop_left=prop_left,
        couple_left=couple_left,
        prop_right=prop_right,
        couple_right=couple_right,
        matrix=matrix,
        sizes=(nl, nr),
    )


def spectral_radius(it: IterationMatrix) -> float:
    """Largest eigenvalue modulus of the assembled propagator."""
    return linalg.spectral_radius(it.matrix)


@dataclass
class SweepResult:
    parameter: str
    values: list[float]
    radii: list[float]
    conditions_pass: list[bool]

    def rows(self):
        for value, radius, ok in zip(self.values, self.radii, self.conditions_pass):
            yield self.parameter, value, radius, ok


def sweep(make_case, parameter: str, values) -> SweepResult:
    """Spectral radius across one swept parameter.

    ``make_case(value)`` must return ``(blocks, dt, conditions_pass)`` for
    each parameter value; entries are independent of each other.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one parameter value")
    radii = []
    passes = []
    for value in values:
        blocks, dt, ok = make_case(value)
        radii.append(spectral_radius(build_iteration_matrix(blocks, dt)))
        passes.append(bool(ok))
    return SweepResult(parameter=parameter, values=values, radii=radii, conditions_pass=passes)
