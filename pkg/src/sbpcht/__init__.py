"""Partitioned SBP-SAT solver for a model conjugate heat transfer problem.

A fluid-like advection-diffusion subdomain and a solid conduction subdomain
are coupled across a conforming interface by penalty terms whose strengths
are chosen constructively for conditional energy stability.  The package
provides the operators, curvilinear geometry, time-coupling schemes,
runtime stability diagnostics, and an iteration-matrix spectral analyzer,
plus a configuration-driven command line.
"""

from .assembly import CoupledBlocks, SatParams, build_coupled_blocks, make_subdomain
from .geometry import (
    AffineMap,
    Metrics,
    PerturbedBoxMap,
    TraceConstants,
    compute_metrics,
    eval_mapping,
    trace_constant,
)
from .physics import LinearDebugSolution, ManufacturedSolution, PdeParams, p_norm_error
from .problem import RunConfig, build_problem, convergence_study, run_problem
from .sbp import Sbp1d, TensorOperatorSet, build_sbp_1d, build_tensor_ops
from .spectral import build_iteration_matrix, spectral_radius, sweep
from .timeloop import (
    EnergyLedger,
    TimeConfig,
    check_conditions,
    run_simulation,
    select_parameters,
)

__version__ = "0.1.0"
