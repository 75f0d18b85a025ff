"""Diagonal-norm summation-by-parts first-derivative operators.

One-dimensional operators of degree p in {1, 2, 3} (interior order 2p,
boundary closures of order p) and their tensor-product extension to
multiple dimensions.  The boundary closures are not tabulated: given the
classical diagonal norm weights, the closure block of Q is solved for
exactly (rational arithmetic) from the accuracy conditions plus
antisymmetry, and every constructed operator is re-verified against the
defining algebraic conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MIN_NODES",
    "Sbp1d",
    "build_sbp_1d",
    "second_derivative_decomposition_check",
    "TensorOperatorSet",
    "build_tensor_ops",
    "extend_to_axis",
]

# Classical diagonal norm boundary weights (per unit spacing) and interior
# central-difference coefficients, per degree.
_NORM_BOUNDARY = {
    1: [Fraction(1, 2)],
    2: [Fraction(17, 48), Fraction(59, 48), Fraction(43, 48), Fraction(49, 48)],
    3: [
        Fraction(13649, 43200),
        Fraction(12013, 8640),
        Fraction(2711, 4320),
        Fraction(5359, 4320),
        Fraction(7877, 8640),
        Fraction(43801, 43200),
    ],
}
_INTERIOR = {
    1: [Fraction(1, 2)],
    2: [Fraction(2, 3), Fraction(-1, 12)],
    3: [Fraction(3, 4), Fraction(-3, 20), Fraction(1, 60)],
}

#: Smallest admissible node count per degree (one interior row between the
#: two boundary closures, matching the coarsest supported grids).
MIN_NODES = {1: 3, 2: 9, 3: 13}


def _solve_exact(a_rows, b_vec, nunk):
    """Minimum-norm exact solution of a consistent rational linear system.

    Gauss-Jordan elimination over Fraction; any nullspace freedom is removed
    by exact orthogonal projection so the returned member is the one the
    float least-squares solve would target.
    """
    m = len(a_rows)
    aug = [list(a_rows[i]) + [b_vec[i]] for i in range(m)]
    piv_cols = []
    r0 = 0
    for c in range(nunk):
        pr = next((i for i in range(r0, m) if aug[i][c] != 0), None)
        if pr is None:
            continue
        aug[r0], aug[pr] = aug[pr], aug[r0]
        pv = aug[r0][c]
        aug[r0] = [x / pv for x in aug[r0]]
        for i in range(m):
            if i != r0 and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r0])]
        piv_cols.append(c)
        r0 += 1
        if r0 == m:
            break
    for i in range(r0, m):
        if aug[i][nunk] != 0:
            raise ValueError("inconsistent SBP closure conditions")
    particular = [Fraction(0)] * nunk
    for i, c in enumerate(piv_cols):
        particular[c] = aug[i][nunk]
    free_cols = [c for c in range(nunk) if c not in piv_cols]
    if not free_cols:
        return particular
    null_basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * nunk
        vec[fc] = Fraction(1)
        for i, c in enumerate(piv_cols):
            vec[c] = -aug[i][fc]
        null_basis.append(vec)
    # project the particular solution onto the nullspace and subtract
    k = len(null_basis)
    gram = [[sum(u * v for u, v in zip(null_basis[i], null_basis[j])) for j in range(k)] for i in range(k)]
    rhs = [sum(u * v for u, v in zip(null_basis[i], particular)) for i in range(k)]
    coef = _solve_exact([row[:] for row in gram], rhs, k)
    out = particular[:]
    for i in range(k):
        for c in range(nunk):
            out[c] -= coef[i] * null_basis[i][c]
    return out


@lru_cache(maxsize=None)
def _closure_block(degree: int):
    """Boundary block of Q (rows x (rows + degree)) as exact rationals."""
    pw = _NORM_BOUNDARY[degree]
    ci = _INTERIOR[degree]
    nb = len(pw)
    ncols = nb + degree
    known = [[Fraction(0)] * ncols for _ in range(nb)]
    known[0][0] = Fraction(-1, 2)
    for i in range(nb):
        for j in range(nb, min(ncols, i + degree + 1)):
            known[i][j] = ci[j - i - 1]
    unknowns = [(i, j) for i in range(nb) for j in range(i + 1, nb)]
    rows, rhs = [], []
    for r in range(degree + 1):
        mono = [Fraction(j**r) if r else Fraction(1) for j in range(ncols)]
        for i in range(nb):
            row = [Fraction(0)] * len(unknowns)
            for k, (a, b) in enumerate(unknowns):
                if a == i:
                    row[k] += mono[b]
                if b == i:
                    row[k] -= mono[a]
            deriv = Fraction(r * i ** (r - 1)) if r >= 1 and (i > 0 or r == 1) else Fraction(0)
            acc = sum(known[i][j] * mono[j] for j in range(ncols))
            rows.append(row)
            rhs.append(pw[i] * deriv - acc)
    sol = _solve_exact(rows, rhs, len(unknowns))
    block = [row[:] for row in known]
    for k, (a, b) in enumerate(unknowns):
        block[a][b] += sol[k]
        block[b][a] -= sol[k]
    return block


@dataclass(frozen=True)
class Sbp1d:
    """Degree-p SBP first-derivative operator on a uniform 1D grid.

    ``diff`` is the derivative matrix D = P^-1 Q with diagonal norm P
    (stored as the ``weights`` vector) and Q + Q^T = E.
    """

    degree: int
    nodes: np.ndarray
    h: float
    weights: np.ndarray
    diff: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def qmat(self) -> np.ndarray:
        return self.weights[:, None] * self.diff

    @property
    def emat(self) -> np.ndarray:
        e = np.zeros((self.n, self.n))
        e[0, 0] = -1.0
        e[-1, -1] = 1.0
        return e

    @property
    def pick_left(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[0] = 1.0
        return e

    @property
    def pick_right(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[-1] = 1.0
        return e

    def verify(self, rtol: float = 1e-11, sbp_tol: float = 1e-13) -> None:
        """Re-check the defining conditions; raises on violation."""
        q = self.qmat
        if np.abs(q + q.T - self.emat).max() > sbp_tol:
            raise AssertionError("Q + Q^T != E")
        if self.weights.min() <= 0.0:
            raise AssertionError("norm weights must be strictly positive")
        scale = max(1.0, np.abs(self.nodes).max())
        if np.abs(self.diff @ np.ones(self.n)).max() > rtol:
            raise AssertionError("D 1 != 0")
        for r in range(1, self.degree + 1):
            err = np.abs(self.diff @ self.nodes**r - r * self.nodes ** (r - 1)).max()
            if err > rtol * scale**r:
                raise AssertionError(f"monomial degree {r} not differentiated exactly")


def build_sbp_1d(degree: int, n: int, lo: float, hi: float) -> Sbp1d:
    """Construct a degree-p diagonal-norm SBP operator on n uniform nodes."""
    if degree not in _NORM_BOUNDARY:
        raise ValueError(f"unsupported degree {degree}; choose from {sorted(_NORM_BOUNDARY)}")
    if n < MIN_NODES[degree]:
        raise ValueError(
            f"degree {degree} needs at least {MIN_NODES[degree]} nodes "
            f"for non-overlapping boundary closures, got {n}"
        )
    if not hi > lo:
        raise ValueError("domain must satisfy hi > lo")
    block = _closure_block(degree)
    pw = _NORM_BOUNDARY[degree]
    ci = _INTERIOR[degree]
    nb = len(pw)
    ncols = nb + degree

    q = np.zeros((n, n))
    for i in range(nb, n - nb):
        for k, c in enumerate(ci, start=1):
            q[i, i + k] = float(c)
            q[i, i - k] = -float(c)
    blk = np.array([[float(x) for x in row] for row in block])
    q[:nb, :ncols] = blk
    q[n - nb:, n - ncols:] = -blk[::-1, ::-1]

    h = (hi - lo) / (n - 1)
    weights = np.ones(n)
    weights[:nb] = [float(x) for x in pw]
    weights[n - nb:] = [float(x) for x in pw[::-1]]
    weights *= h
    nodes = lo + h * np.arange(n)

    op = Sbp1d(degree=degree, nodes=nodes, h=h, weights=weights, diff=q / weights[:, None])
    op.verify()
    return op


def second_derivative_decomposition_check(op: Sbp1d) -> float:
    """Max-norm residual of P D^2 = E D - D^T P D (wide second derivative)."""
    pd = op.weights[:, None] * op.diff
    lhs = pd @ op.diff
    rhs = op.emat @ op.diff - op.diff.T @ pd
    return float(np.abs(lhs - rhs).max())


def _kron_all(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out.tocsr()


@dataclass
class TensorOperatorSet:
    """Tensor-product extension of per-axis 1D SBP operators.

    Node ordering is C order with axis 0 slowest, i.e. the flat index of a
    grid point is ``i0 * (n1 * n2 ...) + i1 * (n2 ...) + ...``.
    """

    axes: tuple[Sbp1d, ...]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(op.n for op in self.axes)

    @property
    def nnodes(self) -> int:
        return int(np.prod(self.dims))

    @property
    def vol_weights(self) -> np.ndarray:
        """Diagonal of the volume norm (Kronecker product of axis norms)."""
        w = self.axes[0].weights
        for op in self.axes[1:]:
            w = np.kron(w, op.weights)
        return w

    def deriv(self, axis: int) -> sp.csr_matrix:
        """Directional derivative along ``axis`` (identity on other axes)."""
        key = ("d", axis)
        if key not in self._cache:
            mats = [sp.identity(n, format="csr") for n in self.dims]
            mats[axis] = sp.csr_matrix(self.axes[axis].diff)
            self._cache[key] = _kron_all(mats)
        return self._cache[key]

    def restrict(self, axis: int, side: str) -> sp.csr_matrix:
        """Face restriction onto the ``side`` in {"lo", "hi"} of ``axis``.

        Applying the result to a grid vector reproduces the stored face
        values bit-exactly (pure selection, no interpolation).
        """
        key = ("r", axis, side)
        if key not in self._cache:
            n = self.dims[axis]
            col = 0 if side == "lo" else n - 1
            sel = sp.csr_matrix((np.ones(1), ([0], [col])), shape=(1, n))
            mats = [sp.identity(m, format="csr") for m in self.dims]
            mats[axis] = sel
            self._cache[key] = _kron_all(mats)
        return self._cache[key]

    def perp_weights(self, axis: int) -> np.ndarray:
        """Diagonal of the face norm perpendicular to ``axis``."""
        others = [self.axes[i].weights for i in range(self.ndim) if i != axis]
        if not others:
            return np.ones(1)
        w = others[0]
        for v in others[1:]:
            w = np.kron(w, v)
        return w

    def face_size(self, axis: int) -> int:
        return self.nnodes // self.dims[axis]

    def grids(self) -> list[np.ndarray]:
        """Reference coordinates per axis, each shaped like the full grid."""
        vecs = [op.nodes for op in self.axes]
        return list(np.meshgrid(*vecs, indexing="ij"))

    def surface_operator(self, axis: int) -> sp.csr_matrix:
        """E along an axis: R_hi^T P_perp R_hi - R_lo^T P_perp R_lo."""
        pp = sp.diags(self.perp_weights(axis))
        rhi = self.restrict(axis, "hi")
        rlo = self.restrict(axis, "lo")
        return (rhi.T @ pp @ rhi - rlo.T @ pp @ rlo).tocsr()


def build_tensor_ops(degree: int, dims, boxes=None) -> TensorOperatorSet:
    """Per-axis SBP operators on the reference box (default [0, 1]^d)."""
    dims = tuple(int(n) for n in dims)
    if boxes is None:
        boxes = [(0.0, 1.0)] * len(dims)
    axes = tuple(build_sbp_1d(degree, n, lo, hi) for n, (lo, hi) in zip(dims, boxes))
    return TensorOperatorSet(axes=axes)


def extend_to_axis(op: Sbp1d, axis: int, dims):
    """Directional matrices for one axis of a tensor grid.

    Returns ``(deriv, restrict_lo, restrict_hi, perp_weights)`` where the
    1D operator ``op`` acts along ``axis`` of a grid with shape ``dims``.
    """
    dims = tuple(int(n) for n in dims)
    if not 0 <= axis < len(dims):
        raise ValueError(f"axis {axis} out of range for {len(dims)}-dimensional grid")
    if dims[axis] != op.n:
        raise ValueError(f"axis {axis} has {dims[axis]} nodes but operator has {op.n}")
    ops = build_tensor_ops(op.degree, dims)
    # replace the target axis with the supplied operator (domains may differ)
    axes = list(ops.axes)
    axes[axis] = op
    full = TensorOperatorSet(axes=tuple(axes))
    return (
        full.deriv(axis),
        full.restrict(axis, "lo"),
        full.restrict(axis, "hi"),
        full.perp_weights(axis),
    )
