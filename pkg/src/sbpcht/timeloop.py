"""Time integration, interface extrapolation, drivers, and diagnostics.

Implements the first-order implicit integrator and the midpoint rule in its
implicit-half-step-plus-reflection form, a weakly coupled partitioned driver
with a fixed number of sub-iterations per step, the monolithic driver, a
runtime energy ledger asserting the discrete stability estimates, and the
constructive penalty-parameter selector with its condition checkers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .assembly import CoupledBlocks, SatParams, assemble_monolithic
from .geometry import TraceConstants
from .physics import PdeParams, boundary_data

__all__ = [
    "SCHEMES",
    "TimeConfig",
    "CoupledState",
    "StabilityError",
    "extrapolate",
    "ZeroData",
    "SolutionData",
    "ImplicitFactors",
    "prepare_factors",
    "partitioned_step",
    "befe_step",
    "initial_state",
    "run_simulation",
    "SimulationResult",
    "EnergyLedger",
    "select_parameters",
    "ConditionEntry",
    "ConditionReport",
    "check_conditions",
]

#: scheme name -> (integrator, coupling, extrapolation order)
SCHEMES = {
    "be-ext1": ("be", "partitioned", 1),
    "be-ext2": ("be", "partitioned", 2),
    "befe-ext1": ("befe", "partitioned", 1),
    "befe-ext2": ("befe", "partitioned", 2),
    "monolithic-be": ("be", "monolithic", 0),
    "monolithic-befe": ("befe", "monolithic", 0),
}


@dataclass(frozen=True)
class TimeConfig:
    """Step size, step count, scheme, and stability constants for a run."""

    dt: float
    nt: int
    scheme: str = "be-ext2"
    n_loop: int = 1
    cstar: float = 1.0
    strict: bool = False          # fatal energy-ledger violations
    track_energy: bool = False

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.nt < 1:
            raise ValueError("nt must be at least 1")
        if self.n_loop < 1:
            raise ValueError("n_loop must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{self.scheme}'; choose from {sorted(SCHEMES)}")

    @property
    def integrator(self) -> str:
        return SCHEMES[self.scheme][0]

    @property
    def coupling(self) -> str:
        return SCHEMES[self.scheme][1]

    @property
    def ext_order(self) -> int:
        return SCHEMES[self.scheme][2]


@dataclass
class CoupledState:
    """Time-stepped solution pair plus the interface history for extrapolation."""

    w: np.ndarray
    v: np.ndarray
    v_hist: np.ndarray | None = None   # previous (or half-step) right field
    t: float = 0.0
    step: int = 0

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.v))):
            raise StabilityError(
                f"non-finite solution entries after step {self.step}",
                step=self.step,
                energy_left=float(np.nansum(self.w**2)),
                energy_right=float(np.nansum(self.v**2)),
            )


class StabilityError(RuntimeError):
    """The time integration diverged; carries a step index and energy snapshot."""

    def __init__(self, message, step=None, energy_left=None, energy_right=None):
        super().__init__(message)
        self.step = step
        self.energy_left = energy_left
        self.energy_right = energy_right


def extrapolate(current: np.ndarray, previous: np.ndarray | None, order: int) -> np.ndarray:
    """Interface guess from the stored history.

    Order 1 repeats the newest level; order 2 extrapolates linearly and
    falls back to order 1 while the history is too short (the fallback is
    part of the contract, not an error).
    """
    if order not in (1, 2):
        raise ValueError("extrapolation order must be 1 or 2")
    if order == 1 or previous is None:
        return current
    return 2.0 * current - previous


class ZeroData:
    """Homogeneous boundary data and sources."""

    def face(self, blocks, side, key, t):
        face = blocks.subdomain(side).metrics.faces[key]
        return np.zeros(face.surf_jac.size)

    def source(self, blocks, side, t):
        return None


class SolutionData:
    """Boundary data and sources manufactured from a closed-form solution."""

    def __init__(self, solution):
        self.solution = solution

    def face(self, blocks, side, key, t):
        sub = blocks.subdomain(side)
        return boundary_data(self.solution, blocks.params, side, sub.metrics.faces[key], t)

    def source(self, blocks, side, t):
        sub = blocks.subdomain(side)
        return self.solution.source(side, sub.metrics.coords, t)


@dataclass
class ImplicitFactors:
    """Cached LU factorizations of the constant implicit matrices."""

    c: float
    lu_left: linalg.LuFactorization | None = None
    lu_right: linalg.LuFactorization | None = None
    lu_mono: linalg.LuFactorization | None = None


def prepare_factors(blocks: CoupledBlocks, tcfg: TimeConfig) -> ImplicitFactors:
    """Factor the per-step implicit matrices once; they are constant in time."""
    c = (1.0 if tcfg.integrator == "be" else 2.0) / tcfg.dt
    if tcfg.coupling == "monolithic":
        return ImplicitFactors(c=c, lu_mono=linalg.lu_factor(assemble_monolithic(blocks, c)))
    al, ar = blocks.left, blocks.right
    lu_left = linalg.lu_factor(sp.diags(c * al.mass) - al.a_self)
    lu_right = linalg.lu_factor(sp.diags(c * ar.mass) - ar.a_self)
    return ImplicitFactors(c=c, lu_left=lu_left, lu_right=lu_right)


def _fixed_rhs(blocks, side, c, u_old, data, t_eval):
    op = blocks.operator(side)
    rhs = c * (op.mass * u_old)
    for key, inj in op.injections.items():
        rhs = rhs + inj @ data.face(blocks, side, key, t_eval)
    src = data.source(blocks, side, t_eval)
    if src is not None:
        rhs = rhs + op.mass * src
    return rhs


def _sweeps(blocks, factors, n_loop, rhs_left, rhs_right, v_star):
    """The fixed sub-iteration: left solve, hand over the trace, right solve."""
    w_new = v_new = None
    for _ in range(n_loop):
        w_new = factors.lu_left.solve(rhs_left + blocks.left.a_neighbour @ v_star)
        v_new = factors.lu_right.solve(rhs_right + blocks.right.a_neighbour @ w_new)
        v_star = v_new
    return w_new, v_new


def partitioned_step(
    state: CoupledState,
    blocks: CoupledBlocks,
    factors: ImplicitFactors,
    tcfg: TimeConfig,
    data,
) -> CoupledState:
    """One implicit step of the weakly coupled partitioned scheme.

    Performs exactly ``n_loop`` sweeps; the first sweep sees the
    extrapolated interface guess, later sweeps the freshly solved one.
    """
    c = factors.c
    t_new = state.t + tcfg.dt
    v_star = extrapolate(state.v, state.v_hist, max(tcfg.ext_order, 1))
    rhs_l = _fixed_rhs(blocks, "L", c, state.w, data, t_new)
    rhs_r = _fixed_rhs(blocks, "R", c, state.v, data, t_new)
    w_new, v_new = _sweeps(blocks, factors, tcfg.n_loop, rhs_l, rhs_r, v_star)
    out = CoupledState(w=w_new, v=v_new, v_hist=state.v, t=t_new, step=state.step + 1)
    out.check_finite()
    return out


def sweep_trace_residuals(
    state: CoupledState,
    blocks: CoupledBlocks,
    factors: ImplicitFactors,
    tcfg: TimeConfig,
    data,
) -> tuple[CoupledState, list[float]]:
    """One implicit step that also reports the sub-iteration convergence.

    Returns the new state plus, per sweep, the surface-norm movement of the
    right subdomain's interface trace; the last entry measures how far the
    fixed number of sub-iterations is from the monolithic fixed point.
    """
    c = factors.c
    t_new = state.t + tcfg.dt
    ifc = blocks.interface()
    wgt = ifc["surf_jac"] * ifc["perp_weights"]
    v_star = extrapolate(state.v, state.v_hist, max(tcfg.ext_order, 1))
    rhs_l = _fixed_rhs(blocks, "L", c, state.w, data, t_new)
    rhs_r = _fixed_rhs(blocks, "R", c, state.v, data, t_new)
    residuals = []
    trace_prev = ifc["restrict_right"] @ v_star
    w_new = v_new = None
    for _ in range(tcfg.n_loop):
        w_new = factors.lu_left.solve(rhs_l + blocks.left.a_neighbour @ v_star)
        v_new = factors.lu_right.solve(rhs_r + blocks.right.a_neighbour @ w_new)
        trace = ifc["restrict_right"] @ v_new
        diff = trace - trace_prev
        residuals.append(float(np.sqrt((diff * diff * wgt).sum())))
        trace_prev = trace
        v_star = v_new
    out = CoupledState(w=w_new, v=v_new, v_hist=state.v, t=t_new, step=state.step + 1)
    out.check_finite()
    return out, residuals


def befe_step(
    state: CoupledState,
    blocks: CoupledBlocks,
    factors: ImplicitFactors,
    tcfg: TimeConfig,
    data,
) -> CoupledState:
    """One midpoint step: implicit half step, then reflection to the full step.

    Data enter at the half-step time level; the stored interface history is
    the half-step right field, so the order-2 guess extrapolates to the next
    half-step time.
    """
    c = factors.c  # 2/dt
    t_half = state.t + 0.5 * tcfg.dt
    v_star = extrapolate(state.v, state.v_hist, max(tcfg.ext_order, 1))
    rhs_l = _fixed_rhs(blocks, "L", c, state.w, data, t_half)
    rhs_r = _fixed_rhs(blocks, "R", c, state.v, data, t_half)
    w_half, v_half = _sweeps(blocks, factors, tcfg.n_loop, rhs_l, rhs_r, v_star)
    out = CoupledState(
        w=2.0 * w_half - state.w,
        v=2.0 * v_half - state.v,
        v_hist=v_half,
        t=state.t + tcfg.dt,
        step=state.step + 1,
    )
    out.check_finite()
    return out


def _monolithic_step(state, blocks, factors, tcfg, data):
    c = factors.c
    half = tcfg.integrator == "befe"
    t_eval = state.t + (0.5 if half else 1.0) * tcfg.dt
    nl = blocks.sizes[0]
    rhs = np.concatenate(
        [
            _fixed_rhs(blocks, "L", c, state.w, data, t_eval),
            _fixed_rhs(blocks, "R", c, state.v, data, t_eval),
        ]
    )
    sol = factors.lu_mono.solve(rhs)
    w_new, v_new = sol[:nl], sol[nl:]
    if half:
        w_new = 2.0 * w_new - state.w
        v_new = 2.0 * v_new - state.v
    out = CoupledState(w=w_new, v=v_new, v_hist=state.v, t=state.t + tcfg.dt, step=state.step + 1)
    out.check_finite()
    return out


def initial_state(blocks: CoupledBlocks, solution=None, w0=None, v0=None) -> CoupledState:
    """Initial data from a closed-form solution or explicit vectors."""
    if solution is not None:
        w0 = solution.value("L", blocks.left_sub.metrics.coords, 0.0)
        v0 = solution.value("R", blocks.right_sub.metrics.coords, 0.0)
    if w0 is None or v0 is None:
        raise ValueError("provide either a solution or explicit initial vectors")
    return CoupledState(w=np.asarray(w0, dtype=float), v=np.asarray(v0, dtype=float))


@dataclass
class SimulationResult:
    state: CoupledState
    ledger: "EnergyLedger | None" = None


def run_simulation(
    blocks: CoupledBlocks,
    tcfg: TimeConfig,
    state: CoupledState,
    data=None,
    ledger: "EnergyLedger | None" = None,
    on_step=None,
) -> SimulationResult:
    """March ``nt`` steps, feeding the energy ledger when provided."""
    data = data if data is not None else ZeroData()
    factors = prepare_factors(blocks, tcfg)
    if ledger is None and tcfg.track_energy:
        ledger = EnergyLedger(blocks, tcfg)
    if ledger is not None:
        ledger.open(state)
    stepper = {
        ("be", "partitioned"): partitioned_step,
        ("befe", "partitioned"): befe_step,
        ("be", "monolithic"): _monolithic_step,
        ("befe", "monolithic"): _monolithic_step,
    }[(tcfg.integrator, tcfg.coupling)]
    for _ in range(tcfg.nt):
        state = stepper(state, blocks, factors, tcfg, data)
        if ledger is not None:
            ledger.update(state, data)
            if tcfg.strict and ledger.violations:
                step, name, margin = ledger.violations[-1]
                raise StabilityError(
                    f"energy bound '{name}' violated at step {step} (margin {margin:.3e})",
                    step=step,
                    energy_left=ledger.energy_left[-1],
                    energy_right=ledger.energy_right[-1],
                )
        if on_step is not None:
            on_step(state)
    return SimulationResult(state=state, ledger=ledger)


class EnergyLedger:
    """Discrete energies and interface terms checked against the estimates.

    Records, per step, the J-weighted solution energies, the interface
    stabilization and trace energies, the boundary-data accumulator, and the
    margins of the applicable stability bound.  Violations are recorded, not
    raised; the driver escalates them under its strict flag.
    """

    #: slack below which a bound violation is recorded
    TOL = 1e-10

    def __init__(self, blocks: CoupledBlocks, tcfg: TimeConfig):
        self.blocks = blocks
        self.tcfg = tcfg
        ifc = blocks.interface()
        self._sigma_w = ifc["surf_jac"] * ifc["perp_weights"]       # Jhat-weighted face norm
        self._sigma_wbar = ifc["perp_weights"] / ifc["surf_jac"]    # Jhat^-1-weighted face norm
        self._ifc = ifc
        self.energy_left: list[float] = []
        self.energy_right: list[float] = []
        self.e1: list[float] = []
        self.e2: list[float] = []
        self.f1: list[float] = []
        self.f2_scaled: list[float] = []    # kappa^2 * F2
        self.data_terms: list[float] = []   # G^j for j >= 1
        self.margins_ext1: list[float] = []
        self.margins_ext2: list[float] = []
        self.violations: list[tuple[int, str, float]] = []
        self._g0 = 0.0
        self._running_e2 = 0.0
        self._s_history: list[float] = []

    # -- norms ---------------------------------------------------------
    def _vol_energy(self, side, u):
        return float((u * u * self.blocks.operator(side).norm_diag).sum())

    def _trace(self, u, v):
        jump = self._ifc["restrict_right"] @ v - self._ifc["restrict_left"] @ u
        return float((jump * jump * self._sigma_w).sum())

    def _flux_gap(self, u, v):
        gap = self._ifc["flux_right"] @ v - self._ifc["flux_left"] @ u
        return float((gap * gap * self._sigma_wbar).sum())

    def open(self, state: CoupledState) -> None:
        """Seed the accumulator with the initial-data energy."""
        sat, dt = self.blocks.sat, self.tcfg.dt
        kappa = self.blocks.params.kappa
        tr = self._ifc["restrict_right"] @ state.v
        fr = self._ifc["flux_right"] @ state.v
        self._g0 = (
            self._vol_energy("L", state.w)
            + self._vol_energy("R", state.v)
            + dt * sat.gamma1 * float((tr * tr * self._sigma_w).sum())
            + dt * sat.gamma2_min * float((fr * fr * self._sigma_wbar).sum())
        )
        self._s_history = [self._g0]
        self._running_e2 = 0.0

    def _boundary_accumulator(self, state: CoupledState, data) -> float:
        """G at the new time level: weighted boundary-data energies."""
        dt = self.tcfg.dt
        total = 0.0
        for side, weight_rule in (("L", "zeta"), ("R", "half")):
            sub = self.blocks.subdomain(side)
            for key in sub.physical_faces:
                face = sub.metrics.faces[key]
                vec = data.face(self.blocks, side, key, state.t)
                wgt = face.surf_jac * sub.ops.perp_weights(key[0])
                norm2 = float((vec * vec * wgt).sum())
                if norm2 == 0.0:
                    continue
                if weight_rule == "half":
                    total += dt * 0.5 * norm2
                else:
                    zeta = float(np.abs(face.lam).max())
                    total += dt * norm2 / zeta if zeta > 0.0 else np.inf
        return total

    def update(self, state: CoupledState, data) -> None:
        sat, dt = self.blocks.sat, self.tcfg.dt
        kappa = self.blocks.params.kappa
        el = self._vol_energy("L", state.w)
        er = self._vol_energy("R", state.v)
        self.energy_left.append(el)
        self.energy_right.append(er)
        self.e1.append(self._trace(state.w, state.v))
        e2 = self._flux_gap(state.w, state.v)
        self.e2.append(e2)
        self._running_e2 += e2
        tr = self._ifc["restrict_right"] @ state.v
        fr = self._ifc["flux_right"] @ state.v
        f1 = float((tr * tr * self._sigma_w).sum())
        f2s = float((fr * fr * self._sigma_wbar).sum())
        self.f1.append(f1)
        self.f2_scaled.append(f2s)

        g_new = self._boundary_accumulator(state, data)
        self.data_terms.append(g_new)
        s_new = self._s_history[-1] + g_new
        self._s_history.append(s_new)

        # first-order-extrapolation estimate: bounded by the accumulated data
        lhs1 = el + er + dt * sat.gamma2_min * self._running_e2 + dt * sat.gamma1 * f1 \
            + dt * sat.gamma2_min * f2s
        margin1 = s_new - lhs1
        self.margins_ext1.append(margin1)

        # second-order-extrapolation estimate with its growing right side
        k = len(self._s_history) - 2          # bound applies from the second step
        if k >= 1:
            s = self._s_history
            h_bound = s[k + 1] + (k + 1) * s[1] + sum((k + 1 - j) * s[j] for j in range(1, k + 1))
            lhs2 = el + (1.0 - dt * sat.gamma1) * er
            margin2 = h_bound - lhs2
        else:
            margin2 = np.inf
        self.margins_ext2.append(margin2)

        name = None
        if self.tcfg.scheme == "be-ext1" and margin1 < -self.TOL:
            name, margin = "ext1-energy-bound", margin1
        elif self.tcfg.scheme == "be-ext2" and margin2 < -self.TOL:
            name, margin = "ext2-energy-bound", margin2
        if name is not None:
            self.violations.append((state.step, name, margin))

    @property
    def total_energy(self) -> np.ndarray:
        return np.asarray(self.energy_left) + np.asarray(self.energy_right)

    def monotone_nonincreasing(self, rtol: float = 1e-12) -> bool:
        e = self.total_energy
        if e.size < 2:
            return True
        allowed = rtol * max(1.0, float(e.max()))
        return bool(np.all(np.diff(e) <= allowed))


def select_parameters(
    traces_left: TraceConstants,
    traces_right: TraceConstants,
    params: PdeParams,
    cstar: float = 1.0,
) -> tuple[SatParams, float]:
    """Constructive penalty selection from the trace constants.

    Takes the tight solution-continuity strength gamma1 = eps / rho_L, equal
    flux penalties sized by the smaller trace constant, and the largest step
    size compatible with the stability conditions for those choices.
    """
    rho_l, rho_r = traces_left.rho, traces_right.rho
    if rho_l <= 0.0 or rho_r <= 0.0:
        raise ValueError("trace constants must be positive")
    gamma1 = params.epsilon / rho_l
    gamma2 = min(rho_l, rho_r) / max(params.epsilon, params.kappa)
    sat = SatParams(gamma1=gamma1, gamma2_left=gamma2, gamma2_right=gamma2)
    dt_max = cstar * rho_l / gamma1
    if sat.gamma2_min > 0.0:
        dt_max = min(dt_max, cstar * min(rho_l, rho_r) / (params.kappa**2 * sat.gamma2_min))
    return sat, dt_max


@dataclass(frozen=True)
class ConditionEntry:
    name: str
    family: str          # "a" (first-order ext), "b" (second-order ext), "da" (1D)
    ok: bool
    detail: str


@dataclass
class ConditionReport:
    scheme: str
    entries: list[ConditionEntry]

    def passed(self, family: str | None = None) -> bool:
        return all(e.ok for e in self.entries if family is None or e.family == family)

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __str__(self) -> str:
        lines = [f"stability conditions ({self.scheme}):"]
        for e in self.entries:
            lines.append(f"  [{'pass' if e.ok else 'FAIL'}] ({e.name}) {e.detail}")
        return "\n".join(lines)


def _leq(lhs, rhs, rtol=1e-12):
    return lhs <= rhs * (1.0 + rtol) + 1e-300


def check_conditions(
    scheme: str,
    sat: SatParams,
    dt: float,
    traces_left: TraceConstants,
    traces_right: TraceConstants,
    params: PdeParams,
    cstar: float = 1.0,
) -> ConditionReport:
    """Evaluate every stability condition with its two sides spelled out.

    Reporting only: drivers may abort on violations under their strict flag.
    """
    rho_l, rho_r = traces_left.rho, traces_right.rho
    eps, kappa = params.epsilon, params.kappa
    g1, g2, g2bar, g2hat = sat.gamma1, sat.gamma2_min, sat.gamma2_max, sat.gamma2_gap
    c1 = cstar * rho_l
    c2 = cstar * min(rho_l, rho_r)
    entries = [
        ConditionEntry(
            "a1", "a",
            _leq(eps / rho_l, g1) and _leq(g1, c1 / dt),
            f"eps/rho_L = {eps / rho_l:.6g} <= gamma1 = {g1:.6g} <= C1/dt = {c1 / dt:.6g}",
        ),
        ConditionEntry(
            "a2", "a",
            _leq(g2, c2 / (kappa**2 * dt)),
            f"gamma2 = {g2:.6g} <= C2/(kappa^2 dt) = {c2 / (kappa**2 * dt):.6g}",
        ),
        ConditionEntry(
            "a3", "a",
            _leq(g2hat, min(rho_l, rho_r) / max(eps, kappa)),
            f"|gamma2_L - gamma2_R| = {g2hat:.6g} <= "
            f"min(rho)/max(eps,kappa) = {min(rho_l, rho_r) / max(eps, kappa):.6g}",
        ),
        ConditionEntry(
            "b0", "b", rho_r < 1.0, f"rho_R = {rho_r:.6g} < 1"
        ),
        ConditionEntry(
            "b1", "b",
            g1 * rho_l * (1.0 - rho_r) >= eps * (1.0 - 1e-12) if rho_r < 1.0 else False,
            f"gamma1 rho_L (1 - rho_R) = {g1 * rho_l * (1.0 - rho_r):.6g} >= eps = {eps:.6g}",
        ),
        ConditionEntry(
            "b2", "b",
            _leq(dt * g1 * (1.0 + 4.0 / rho_r**2), 1.0),
            f"dt gamma1 (1 + 4/rho_R^2) = {dt * g1 * (1.0 + 4.0 / rho_r**2):.6g} <= 1",
        ),
        ConditionEntry(
            "b3", "b",
            _leq(g2bar, 2.0 * rho_r / (5.0 * kappa)),
            f"max gamma2 = {g2bar:.6g} <= 2 rho_R / (5 kappa) = {2.0 * rho_r / (5.0 * kappa):.6g}",
        ),
        ConditionEntry(
            "b4", "b",
            _leq(g2hat, min(rho_l, rho_r) / max(eps, kappa)),
            f"|gamma2_L - gamma2_R| = {g2hat:.6g} <= "
            f"min(rho)/max(eps,kappa) = {min(rho_l, rho_r) / max(eps, kappa):.6g}",
        ),
        ConditionEntry(
            "da1", "da",
            _leq(eps / rho_l, g1) and _leq(g1, c1 / dt),
            f"eps/rho = {eps / rho_l:.6g} <= gamma1 = {g1:.6g} <= C1/dt = {c1 / dt:.6g}",
        ),
        ConditionEntry(
            "da2", "da",
            _leq(g2, c2 / (kappa**2 * dt)),
            f"gamma2 = {g2:.6g} <= C2/(kappa^2 dt) = {c2 / (kappa**2 * dt):.6g}",
        ),
    ]
    return ConditionReport(scheme=scheme, entries=entries)
