"""Configuration-driven command-line front end.

Subcommands: ``run`` (single simulation), ``converge`` (mesh-convergence
study), ``spectrum`` (iteration-matrix spectral-radius sweep), ``params``
(penalty-selection and condition report).  Tables are CSV with the resolved
configuration embedded as header comments; plots are static SVG.

Exit codes: 0 success, 2 configuration error, 3 stability failure,
4 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, resolved_items
from .linalg import LinalgError
from .problem import convergence_study, build_problem, parameter_report, run_problem, spectrum_sweep
from .timeloop import StabilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STABILITY = 3
EXIT_SOLVER = 4


def _out_dir(cfg) -> Path:
    base = os.environ.get("SBPCHT_OUTDIR", cfg.output.directory)
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(cfg, columns, rows) -> str:
    lines = [f"# {key} = {value}" for key, value in resolved_items(cfg)]
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(f"{cell:.12e}")
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    report = problem.conditions()
    family = "b" if cfg.time.scheme.endswith("ext2") else "a"
    if cfg.time.strict and not report.passed(family):
        failed = [e.name for e in report.entries if e.family == family and not e.ok]
        print(report)
        print(f"stability conditions violated: {', '.join(failed)}", file=sys.stderr)
        return EXIT_STABILITY
    result, err = run_problem(problem)
    out = _out_dir(cfg)
    for side, coords, values in (
        ("left", problem.blocks.left_sub.metrics.coords, result.state.w),
        ("right", problem.blocks.right_sub.metrics.coords, result.state.v),
    ):
        rows = list(zip(*(list(coords) + [values])))
        _write_atomic(
            out / f"solution_{side}.csv",
            _csv(cfg, [*("xy"[: len(coords)]), "value"], rows),
        )
    if result.ledger is not None and cfg.output.write_ledger:
        ledger = result.ledger
        rows = [
            (k + 1, el, er, e1, e2, m1)
            for k, (el, er, e1, e2, m1) in enumerate(
                zip(ledger.energy_left, ledger.energy_right, ledger.e1, ledger.e2,
                    ledger.margins_ext1)
            )
        ]
        _write_atomic(
            out / "energy_ledger.csv",
            _csv(cfg, ["step", "energy_left", "energy_right",
                       "trace_gap", "flux_gap", "ext1_margin"], rows),
        )
    print(f"final time t = {result.state.t:.6g} after {result.state.step} steps")
    if err is not None:
        print(f"error = {err:.12e}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = load_config(args.config)
    grids = [int(v) for v in args.grids.split(",") if v]
    rows = convergence_study(cfg, grids, workers=args.workers)
    table = [
        (
            row.n,
            row.error_partitioned,
            row.order_partitioned if row.order_partitioned is not None else "",
            row.error_monolithic,
            row.order_monolithic if row.order_monolithic is not None else "",
        )
        for row in rows
    ]
    out = _out_dir(cfg)
    _write_atomic(
        out / "convergence.csv",
        _csv(cfg, ["n", "error_partitioned", "order_partitioned",
                   "error_monolithic", "order_monolithic"], table),
    )
    print(f"{'n':>6} {'partitioned':>16} {'order':>7} {'monolithic':>16} {'order':>7}")
    for row in rows:
        op = f"{row.order_partitioned:.2f}" if row.order_partitioned is not None else "-"
        om = f"{row.order_monolithic:.2f}" if row.order_monolithic is not None else "-"
        print(f"{row.n:>6} {row.error_partitioned:>16.6e} {op:>7} "
              f"{row.error_monolithic:>16.6e} {om:>7}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    values = [float(v) for v in args.values.split(",") if v]
    if not values:
        print("spectrum: empty sweep list", file=sys.stderr)
        return EXIT_CONFIG
    result = spectrum_sweep(cfg, args.param, values)
    out = _out_dir(cfg)
    _write_atomic(
        out / f"spectrum_{args.param}.csv",
        _csv(cfg, ["parameter", "value", "spectral_radius", "conditions_pass"],
             list(result.rows())),
    )
    _plot_spectrum(result, out / f"spectrum_{args.param}.svg")
    for _, value, radius, ok in result.rows():
        flag = "" if ok else "  (conditions violated)"
        print(f"{args.param} = {value:.6g}: spectral radius = {radius:.6f}{flag}")
    return EXIT_OK


def _plot_spectrum(result, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(result.values, result.radii, "o-", label="spectral radius")
    ax.axhline(1.0, color="crimson", linestyle="--", linewidth=1.0, label="radius = 1")
    ax.set_xlabel(result.parameter)
    ax.set_ylabel("spectral radius")
    if result.parameter in ("dt", "dy"):
        ax.set_xscale("log")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _cmd_params(args) -> int:
    cfg = load_config(args.config)
    print(parameter_report(cfg))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbpcht",
        description="Partitioned SBP-SAT solver for a model conjugate heat transfer problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single simulation")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("converge", help="mesh-convergence study")
    p_conv.add_argument("config")
    p_conv.add_argument("--grids", required=True, help="comma-separated node counts")
    p_conv.add_argument("--workers", type=int, default=None)
    p_conv.set_defaults(func=_cmd_converge)

    p_spec = sub.add_parser("spectrum", help="iteration-matrix spectral-radius sweep")
    p_spec.add_argument("config")
    p_spec.add_argument("--param", required=True, choices=["gamma1", "gamma2", "dt", "dy"])
    p_spec.add_argument("--values", required=True, help="comma-separated parameter values")
    p_spec.set_defaults(func=_cmd_spectrum)

    p_par = sub.add_parser("params", help="penalty selection and condition report")
    p_par.add_argument("config")
    p_par.set_defaults(func=_cmd_params)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"stability failure: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except LinalgError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
