"""
Command line entry point for DrivenCavity
"""
from pathlib import Path
from typing import List, Optional, Tuple
import argparse
import logging
import sys
import time

import pandas as pd
from pydantic import ValidationError

from drivencavity import __version__
from drivencavity.analysis.observables import (
    correlation_row,
    density,
    fit_correlation_length,
    g2_row,
    level_populations,
    variance,
)
from drivencavity.config import settings
from drivencavity.errors import CavityError, ConfigError, CorrelationFitError
from drivencavity.lattice.model import build_liouvillian
from drivencavity.lattice.momentum import resonant_modes
from drivencavity.models.schemas import OutputFormat, SolverKind, SweepConfig
from drivencavity.solvers.dense import steady_state
from drivencavity.solvers.mpdo import relax_to_steady
from drivencavity.sweep.emit import emit
from drivencavity.sweep.runner import load_config, run_sweep
from drivencavity.validation import run_validation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def parse_formats(text: str) -> Tuple[OutputFormat, ...]:
    try:
        return tuple(OutputFormat(part.strip().lower()) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"Unknown output format in '{text}'; use csv, json or csv,json")


def _point(config: SweepConfig, drive: Optional[float], hopping: Optional[float]) -> Tuple[float, float]:
    """Requested (Omega, J), defaulting to the first grid point"""
    _, _, grid_drive, grid_hopping = config.grid.points()[0]
    return (grid_drive if drive is None else drive, grid_hopping if hopping is None else hopping)


def _solve(config: SweepConfig, drive: float, hopping: float):
    params = config.params.at_point(drive, hopping)
    start = time.perf_counter()
    if config.solver == SolverKind.DENSE:
        state, report = steady_state(build_liouvillian(config.spec, params), config.dense)
        summary = {
            "method": report.method.value,
            "residual": report.residual,
            "iterations": report.iterations,
            "singular_values": ", ".join(f"{s:.3e}" for s in report.singular_values),
        }
    else:
        state, report = relax_to_steady(config.spec, params, config.mpdo)
        summary = {
            "converged": report.converged,
            "t_reached": report.t_reached,
            "observable_drift": report.observable_drift,
            "truncation_error": report.final_truncation_error,
            "max_bond_used": report.max_bond_used,
        }
    summary["wall_time_s"] = round(time.perf_counter() - start, 3)
    return state, summary


def cmd_steady(args) -> int:
    config = load_config(args.config)
    drive, hopping = _point(config, args.drive, args.hopping)
    state, summary = _solve(config, drive, hopping)
    print(f"\nSteady state at Omega={drive:g}, J={hopping:g} ({config.solver.value})")
    for key, value in summary.items():
        print(f"  {key}: {value}")
    sites = range(config.spec.n_sites)
    table = pd.DataFrame({
        "site": list(sites),
        "density": [density(state, j) for j in sites],
        "variance": [variance(state, j) for j in sites],
        "top_level": [level_populations(state, j)[-1] for j in sites],
    })
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_correlate(args) -> int:
    config = load_config(args.config)
    drive, hopping = _point(config, args.drive, args.hopping)
    state, _ = _solve(config, drive, hopping)
    anchor = config.anchor_site if args.anchor is None else args.anchor
    row = correlation_row(state, anchor)
    table = pd.DataFrame({
        "site": list(range(config.spec.n_sites)),
        "g1_re": row.values.real,
        "g1_im": row.values.imag,
        "g1_abs": row.magnitudes(),
        "g2": g2_row(state, anchor),
    })
    print(f"\nCorrelations from site {anchor} at Omega={drive:g}, J={hopping:g}")
    print(table.to_string(index=False))
    try:
        fit = fit_correlation_length(row, free_amplitude=not args.unit_amplitude)
        status = "" if fit.success else " (no decay)"
        print(f"\ncorrelation length: {fit.correlation_length:.6g}{status}")
        print(f"amplitude: {fit.amplitude:.6g}, rms residual: {fit.rms_residual:.3e}, points: {fit.n_points}")
    except CorrelationFitError as e:
        print(f"\ncorrelation length: unavailable ({e})")
    return EXIT_OK


def cmd_modes(args) -> int:
    if args.config:
        config = load_config(args.config)
        n_sites = config.spec.n_sites
        _, hopping = _point(config, None, args.hopping)
        delta = config.params.delta if args.delta is None else args.delta
    else:
        if args.sites is None:
            raise ConfigError("modes needs --config or --sites")
        n_sites, delta, hopping = args.sites, args.delta or 0.0, args.hopping or 0.0
    spectrum = resonant_modes(n_sites, delta, hopping, args.tol)
    print(spectrum.to_frame().to_string(index=False))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    output = {}
    if args.out:
        output["path"] = args.out
    if args.format:
        output["formats"] = parse_formats(args.format)
    if output:
        config = SweepConfig.model_validate({
            **config.model_dump(), "output": {**config.output.model_dump(), **output}
        })
    checkpoint_dir = Path(args.checkpoint_dir or settings.checkpoint_dir) / config.name
    result = run_sweep(config, workers=args.threads, checkpoint_dir=checkpoint_dir, resume=args.resume)
    for path in emit(result):
        print(f"Saved {path}")
    if result.failures:
        print(f"{len(result.failures)} of {len(result.records)} points failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_validate(args) -> int:
    report = run_validation()
    print(report.to_string(index=False))
    return EXIT_OK if bool(report["passed"].all()) else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivencavity",
        description="Steady states of driven-dissipative Bose-Hubbard cavity arrays",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    steady = sub.add_parser("steady", help="Solve one point and print state diagnostics")
    correlate = sub.add_parser("correlate", help="g1/g2 rows and correlation length at one point")
    for p in (steady, correlate):
        p.add_argument("--config", required=True, help="Path to a JSON run configuration")
        p.add_argument("--drive", type=float, help="Drive strength Omega (default: first grid value)")
        p.add_argument("--hopping", type=float, help="Hopping J (default: first grid value)")
    correlate.add_argument("--anchor", type=int, help="Anchor site (default: config anchor or middle site)")
    correlate.add_argument("--unit-amplitude", action="store_true", help="Pin the fit amplitude to 1")
    steady.set_defaults(handler=cmd_steady)
    correlate.set_defaults(handler=cmd_correlate)

    sweep = sub.add_parser("sweep", help="Run a parameter grid and write CSV/JSON")
    sweep.add_argument("--config", required=True, help="Path to a JSON run configuration")
    sweep.add_argument("--out", help="Output directory (overrides the config)")
    sweep.add_argument("--format", help="Comma-separated output formats: csv,json")
    sweep.add_argument("--threads", type=int, default=None, help="Worker processes (default from settings)")
    sweep.add_argument("--checkpoint-dir", help="Checkpoint root (default from settings)")
    sweep.add_argument("--resume", action="store_true", help="Skip grid points already in the checkpoint log")
    sweep.set_defaults(handler=cmd_sweep)

    modes = sub.add_parser("modes", help="Momentum-mode detunings and resonant modes")
    modes.add_argument("--config", help="Take N, Delta and J from a run configuration")
    modes.add_argument("--sites", type=int, help="Number of sites N")
    modes.add_argument("--delta", type=float, help="Detuning Delta")
    modes.add_argument("--hopping", type=float, help="Hopping J")
    modes.add_argument("--tol", type=float, default=1e-12, help="Resonance tolerance on |detuning|")
    modes.set_defaults(handler=cmd_modes)

    validate = sub.add_parser("validate", help="Run the quick oracle suite")
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ConfigError, ValidationError) as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CavityError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    raise SystemExit(main())
