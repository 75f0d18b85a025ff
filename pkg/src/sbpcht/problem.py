"""Run configuration schema and problem assembly.

Turns a validated configuration into assembled subdomains, penalty
parameters, data sources, and drivers, and provides the study runners
(mesh-convergence, spectral sweeps, parameter reports) shared by the CLI
and the test suite.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    CoupledBlocks,
    SatParams,
    Subdomain,
    build_coupled_blocks,
    make_subdomain,
)
from .geometry import compute_metrics, eval_mapping, mapping_from_name
from .physics import ManufacturedSolution, PdeParams, coupled_error
from .sbp import build_tensor_ops
from .spectral import SweepResult, sweep
from .timeloop import (
    SolutionData,
    TimeConfig,
    ZeroData,
    check_conditions,
    initial_state,
    run_simulation,
    select_parameters,
)

__all__ = [
    "GeometryConfig",
    "SatConfig",
    "TimeSection",
    "OutputConfig",
    "RunConfig",
    "Problem",
    "build_subdomains",
    "build_problem",
    "run_problem",
    "ConvergenceRow",
    "convergence_study",
    "spectrum_sweep",
    "parameter_report",
]


@dataclass(frozen=True)
class GeometryConfig:
    map: str = "curvilinear"
    nx: int = 20
    ny: int = 20
    degree: int = 2
    left: tuple[float, float, float, float] = (-1.0, 0.0, -1.0, 1.0)    # x0 x1 y0 y1
    right: tuple[float, float, float, float] = (0.0, 1.2, -1.0, 1.0)

    def __post_init__(self):
        if self.left[1] != self.right[0]:
            raise ValueError("subdomains must share the interface line x = const")
        if self.left[2:] != self.right[2:]:
            raise ValueError("subdomains must share the tangential extent")


@dataclass(frozen=True)
class SatConfig:
    """Penalty selection: constructive, fixed values, or resolution-scaled.

    In "scaled" mode gamma1 is a factor on eps * (nx - 1) and the gamma2
    values are divided by max(1, kappa)^2, which keeps refinement studies
    stable without retuning per grid.
    """

    mode: str = "auto"            # "auto", "manual", or "scaled"
    cstar: float = 1.0
    gamma1: float = 0.5
    gamma2_left: float = 0.1
    gamma2_right: float = 0.1

    def __post_init__(self):
        if self.mode not in ("auto", "manual", "scaled"):
            raise ValueError("sat mode must be 'auto', 'manual', or 'scaled'")
        if self.mode == "auto" and self.cstar <= 0.0:
            raise ValueError("auto SAT selection requires a positive cstar")


@dataclass(frozen=True)
class TimeSection:
    scheme: str = "be-ext2"
    dt: float | str = 1e-3        # number or "auto" (selector step bound)
    t_final: float = 0.1
    n_loop: int = 1
    strict: bool = False
    ledger: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    write_ledger: bool = False


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    physics: PdeParams = field(default_factory=PdeParams)
    mms: bool = True
    sat: SatConfig = field(default_factory=SatConfig)
    time: TimeSection = field(default_factory=TimeSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_grid(self, n: int) -> "RunConfig":
        return replace(self, geometry=replace(self.geometry, nx=n, ny=n))


def _side_mapping(geo: GeometryConfig, side: str):
    x0, x1, y0, y1 = geo.left if side == "L" else geo.right
    if geo.map in ("cartesian", "identity", "affine"):
        return mapping_from_name("cartesian", lo=(x0, y0), hi=(x1, y1))
    if geo.map in ("curvilinear", "perturbed"):
        # raw first coordinate 0 lands on the interface for both blocks
        if side == "L":
            return mapping_from_name("curvilinear", lo=(x1, y1), hi=(x0, y0), flip_x=False)
        return mapping_from_name("curvilinear", lo=(x0, y1), hi=(x1, y0), flip_x=True)
    raise ValueError(f"unknown map '{geo.map}'")


def build_subdomains(geo: GeometryConfig, params: PdeParams) -> tuple[Subdomain, Subdomain]:
    subs = []
    for side in ("L", "R"):
        ops = build_tensor_ops(geo.degree, (geo.nx, geo.ny))
        coords = eval_mapping(_side_mapping(geo, side), ops)
        metrics = compute_metrics(coords, ops, advection=params.advection)
        subs.append(make_subdomain(side, ops, metrics))
    return subs[0], subs[1]


@dataclass
class Problem:
    """A fully assembled run: blocks, penalties, time config, data, solution."""

    config: RunConfig
    blocks: CoupledBlocks
    tcfg: TimeConfig
    dt_max: float | None
    solution: ManufacturedSolution | None

    @property
    def data(self):
        return SolutionData(self.solution) if self.solution is not None else ZeroData()

    def conditions(self):
        return check_conditions(
            self.tcfg.scheme,
            self.blocks.sat,
            self.tcfg.dt,
            self.blocks.left_sub.traces,
            self.blocks.right_sub.traces,
            self.config.physics,
            cstar=self.config.sat.cstar,
        )

    def exact(self, t: float):
        if self.solution is None:
            raise ValueError("no closed-form solution configured")
        return (
            self.solution.value("L", self.blocks.left_sub.metrics.coords, t),
            self.solution.value("R", self.blocks.right_sub.metrics.coords, t),
        )

    def error(self, state) -> float:
        wex, vex = self.exact(state.t)
        return coupled_error(
            state.w, wex, self.blocks.left.norm_diag,
            state.v, vex, self.blocks.right.norm_diag,
        )


def build_problem(cfg: RunConfig) -> Problem:
    left_sub, right_sub = build_subdomains(cfg.geometry, cfg.physics)
    if cfg.sat.mode == "auto":
        sat, dt_max = select_parameters(
            left_sub.traces, right_sub.traces, cfg.physics, cstar=cfg.sat.cstar
        )
    elif cfg.sat.mode == "scaled":
        damp = max(1.0, cfg.physics.kappa) ** 2
        sat = SatParams(
            gamma1=cfg.sat.gamma1 * cfg.physics.epsilon * (cfg.geometry.nx - 1),
            gamma2_left=cfg.sat.gamma2_left / damp,
            gamma2_right=cfg.sat.gamma2_right / damp,
        )
        dt_max = None
    else:
        sat = SatParams(
            gamma1=cfg.sat.gamma1,
            gamma2_left=cfg.sat.gamma2_left,
            gamma2_right=cfg.sat.gamma2_right,
        )
        dt_max = None
    blocks = build_coupled_blocks(left_sub, right_sub, cfg.physics, sat)

    dt = cfg.time.dt
    if isinstance(dt, str):
        if dt != "auto":
            raise ValueError(f"time step must be a number or 'auto', got {dt!r}")
        if dt_max is None:
            raise ValueError("dt = auto requires sat mode = auto")
        dt = dt_max
    nt = max(1, int(round(cfg.time.t_final / dt)))
    tcfg = TimeConfig(
        dt=float(dt),
        nt=nt,
        scheme=cfg.time.scheme,
        n_loop=cfg.time.n_loop,
        cstar=cfg.sat.cstar,
        strict=cfg.time.strict,
        track_energy=cfg.time.ledger,
    )
    solution = ManufacturedSolution(cfg.physics) if cfg.mms else None
    return Problem(config=cfg, blocks=blocks, tcfg=tcfg, dt_max=dt_max, solution=solution)


def run_problem(problem: Problem):
    """March the configured run from its initial data; returns (result, error)."""
    if problem.solution is not None:
        state = initial_state(problem.blocks, solution=problem.solution)
    else:
        nl, nr = problem.blocks.sizes
        state = initial_state(problem.blocks, w0=np.zeros(nl), v0=np.zeros(nr))
    result = run_simulation(problem.blocks, problem.tcfg, state, data=problem.data)
    err = problem.error(result.state) if problem.solution is not None else None
    return result, err


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error_partitioned: float
    order_partitioned: float | None
    error_monolithic: float
    order_monolithic: float | None

    @property
    def agreement_digits(self) -> float:
        gap = abs(self.error_partitioned - self.error_monolithic)
        if gap == 0.0:
            return math.inf
        return -math.log10(gap / abs(self.error_monolithic))


def _study_error(cfg: RunConfig, n: int, monolithic: bool) -> float:
    cfg = cfg.with_grid(n)
    if monolithic:
        scheme = "monolithic-befe" if "befe" in cfg.time.scheme else "monolithic-be"
        cfg = replace(cfg, time=replace(cfg.time, scheme=scheme, n_loop=1))
    _, err = run_problem(build_problem(cfg))
    return err


def convergence_study(cfg: RunConfig, grids, workers: int | None = None) -> list[ConvergenceRow]:
    """Partitioned-versus-monolithic error ladder over strictly refining grids.

    Grid runs are independent; they execute on a small process pool.
    """
    grids = [int(n) for n in grids]
    if len(grids) < 2 or any(b <= a for a, b in zip(grids, grids[1:])):
        raise ValueError("need at least two strictly refining grids")
    if not cfg.mms:
        raise ValueError("a convergence study needs the manufactured solution")
    jobs = [(n, mono) for n in grids for mono in (False, True)]
    if workers is None:
        import os

        workers = min(2, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {job: pool.submit(_study_error, cfg, *job) for job in jobs}
            errors = {job: fut.result() for job, fut in futures.items()}
    else:
        errors = {job: _study_error(cfg, *job) for job in jobs}
    rows = []
    for i, n in enumerate(grids):
        ep = errors[(n, False)]
        em = errors[(n, True)]
        if i == 0:
            op = om = None
        else:
            ratio = math.log2(grids[i] / grids[i - 1])
            op = math.log2(errors[(grids[i - 1], False)] / ep) / ratio
            om = math.log2(errors[(grids[i - 1], True)] / em) / ratio
        rows.append(ConvergenceRow(n, ep, op, em, om))
    return rows


def spectrum_sweep(cfg: RunConfig, parameter: str, values) -> SweepResult:
    """Spectral-radius sweep of one parameter around the configured baseline.

    The swept quantity is one of gamma1, gamma2 (both sides together), dt,
    or dy (interface node spacing, which resets the grid).  Condition flags
    report the second-order-extrapolation set, matching the analyzed scheme.
    """
    if parameter not in ("gamma1", "gamma2", "dt", "dy"):
        raise ValueError(f"unknown sweep parameter '{parameter}'")
    base_dt = cfg.time.dt if not isinstance(cfg.time.dt, str) else 1e-3

    def make_case(value):
        local = cfg
        dt = base_dt
        if parameter == "gamma1":
            local = replace(local, sat=replace(local.sat, mode="manual", gamma1=value))
        elif parameter == "gamma2":
            local = replace(
                local, sat=replace(local.sat, mode="manual", gamma2_left=value, gamma2_right=value)
            )
        elif parameter == "dt":
            dt = value
        elif parameter == "dy":
            span = local.geometry.left[3] - local.geometry.left[2]
            n = max(int(round(span / value)) + 1, 5)
            local = local.with_grid(n)
        problem = build_problem(replace(local, time=replace(local.time, dt=dt)))
        report = check_conditions(
            "be-ext2",
            problem.blocks.sat,
            dt,
            problem.blocks.left_sub.traces,
            problem.blocks.right_sub.traces,
            local.physics,
            cstar=local.sat.cstar,
        )
        return problem.blocks, dt, report.passed("b")

    return sweep(make_case, parameter, values)


def parameter_report(cfg: RunConfig) -> str:
    """Trace constants, selected penalties, step bound, and condition table."""
    left_sub, right_sub = build_subdomains(cfg.geometry, cfg.physics)
    sat, dt_max = select_parameters(
        left_sub.traces, right_sub.traces, cfg.physics, cstar=cfg.sat.cstar
    )
    if cfg.sat.mode == "manual":
        sat = SatParams(cfg.sat.gamma1, cfg.sat.gamma2_left, cfg.sat.gamma2_right)
    dt = cfg.time.dt if not isinstance(cfg.time.dt, str) else dt_max
    report = check_conditions(
        cfg.time.scheme, sat, dt, left_sub.traces, right_sub.traces,
        cfg.physics, cstar=cfg.sat.cstar,
    )
    lines = [
        f"rho_L = {left_sub.traces.rho:.8g}",
        f"rho_R = {right_sub.traces.rho:.8g}",
        f"gamma1 = {sat.gamma1:.8g}",
        f"gamma2_left = {sat.gamma2_left:.8g}",
        f"gamma2_right = {sat.gamma2_right:.8g}",
        f"dt_max = {dt_max:.8g}",
        f"dt = {dt:.8g}",
        str(report),
    ]
    if right_sub.traces.rho >= 1.0:
        lines.append("note: rho_R >= 1, second-order-extrapolation conditions inapplicable")
    return "\n".join(lines)
