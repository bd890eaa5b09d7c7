"""
Parameter-grid orchestration with an append-only checkpoint log
"""
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union
import hashlib
import json
import logging
import math
import time
import warnings

import numpy as np
import scipy.sparse.linalg as spla
from pydantic import ValidationError

from drivencavity.analysis.observables import (
    correlation_row,
    density,
    fit_correlation_length,
    g2_row,
    level_populations,
    variance,
)
from drivencavity.config import settings
from drivencavity.errors import CavityError, CheckpointError, ConfigError, CorrelationFitError
from drivencavity.lattice.model import build_liouvillian, check_truncation
from drivencavity.lattice.momentum import resonant_modes
from drivencavity.models.schemas import PointRecord, SolverKind, SweepConfig, SweepResult
from drivencavity.solvers.dense import steady_state
from drivencavity.solvers.mpdo import relax_to_steady

logger = logging.getLogger(__name__)

GridPoint = Tuple[int, int, float, float]
LOG_NAME = "points.jsonl"


def load_config(path: Union[str, Path]) -> SweepConfig:
    """Read and validate a JSON run configuration"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    try:
        return SweepConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}")


def config_digest(config: SweepConfig) -> str:
    """Stable hash of the resolved config, used to tie a checkpoint log to its run"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _finite(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def _finite_list(values: Iterable[float]) -> List[Optional[float]]:
    return [_finite(v) for v in values]


def _observe(record: PointRecord, state, config: SweepConfig) -> PointRecord:
    flags = config.observables
    spec = config.spec
    sites = range(spec.n_sites)
    update: Dict[str, object] = {}
    if flags.density:
        update["densities"] = [density(state, j) for j in sites]
    if flags.variance:
        update["variances"] = [variance(state, j) for j in sites]
    if flags.level_populations:
        update["top_level_population"] = [float(level_populations(state, j)[-1]) for j in sites]
    if flags.g1_row or flags.correlation_length:
        row = correlation_row(state, config.anchor_site)
        if flags.g1_row:
            update["g1_real"] = _finite_list(row.values.real)
            update["g1_imag"] = _finite_list(row.values.imag)
        if flags.correlation_length:
            try:
                fit = fit_correlation_length(row)
                update["fit_residual"] = _finite(fit.rms_residual)
                if fit.success:
                    update["correlation_length"] = _finite(fit.correlation_length)
            except CorrelationFitError as e:
                logger.debug("No correlation length at (%g, %g): %s", record.drive, record.hopping, e)
    if flags.g2_row:
        update["g2"] = _finite_list(g2_row(state, config.anchor_site))
    if flags.mode_spectrum:
        params = config.params.at_point(record.drive, record.hopping)
        update["mode_detunings"] = list(resonant_modes(spec.n_sites, params.delta, params.hopping).detunings)
    return record.model_copy(update=update)


def _point_checkpoint(checkpoint_dir: Optional[Path], index_drive: int, index_hopping: int) -> Optional[Path]:
    if checkpoint_dir is None:
        return None
    return checkpoint_dir / f"point_{index_drive:03d}_{index_hopping:03d}.npz"


def evaluate_point(config: SweepConfig, point: GridPoint, checkpoint_dir: Optional[Path] = None,
                   resume: bool = False) -> PointRecord:
    """Solve one grid point; solver failures are stored in the record's error field"""
    index_drive, index_hopping, drive, hopping = point
    record = PointRecord(index_drive=index_drive, index_hopping=index_hopping, drive=drive, hopping=hopping)
    params = config.params.at_point(drive, hopping)
    start = time.perf_counter()
    try:
        if config.solver == SolverKind.DENSE:
            state, report = steady_state(build_liouvillian(config.spec, params), config.dense)
            record = record.model_copy(update={
                "converged": True,
                "residual": _finite(report.residual),
                "min_eigenvalue": _finite(state.eigenvalues.min()),
            })
        else:
            state, report = relax_to_steady(
                config.spec, params, config.mpdo,
                checkpoint_path=_point_checkpoint(checkpoint_dir, index_drive, index_hopping),
                resume=resume,
            )
            change = report.bond_check_change
            record = record.model_copy(update={
                "converged": report.converged,
                "residual": _finite(report.observable_drift),
                "truncation_error": _finite(report.final_truncation_error),
                "bond_check_change": None if change is None else _finite(change),
            })
        record = _observe(record, state, config)
    except (CavityError, np.linalg.LinAlgError, spla.ArpackError, ArithmeticError) as e:
        logger.warning("Point (%d, %d) failed: %s", index_drive, index_hopping, e)
        record = record.model_copy(update={"error": f"{type(e).__name__}: {e}"})
    logger.info(
        "Point (%d, %d) Omega=%g J=%g done in %.2fs",
        index_drive, index_hopping, drive, hopping, time.perf_counter() - start,
    )
    return record


class CheckpointLog:
    """Append-only JSON-lines log of completed grid points"""

    def __init__(self, directory: Union[str, Path], config: SweepConfig):
        self.path = Path(directory) / LOG_NAME
        self.digest = config_digest(config)

    def load(self) -> Dict[Tuple[int, int], PointRecord]:
        if not self.path.exists():
            return {}
        with open(self.path, "r") as f:
            lines = [line for line in f.read().splitlines() if line.strip()]
        if not lines:
            return {}
        header = json.loads(lines[0])
        if header.get("config_digest") != self.digest:
            raise CheckpointError(f"Checkpoint log {self.path} was written by a different config")
        records = {}
        for line in lines[1:]:
            try:
                record = PointRecord.model_validate_json(line)
            except ValidationError:
                # a line cut short by an interruption
                logger.warning("Skipping unreadable line in %s", self.path)
                continue
            records[record.flat_index] = record
        return records

    def start(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w") as f:
                f.write(json.dumps({"config_digest": self.digest}) + "\n")

    def append(self, record: PointRecord) -> None:
        with open(self.path, "a") as f:
            f.write(record.model_dump_json() + "\n")


def run_sweep(config: SweepConfig, workers: Optional[int] = None,
              checkpoint_dir: Optional[Union[str, Path]] = None, resume: bool = False) -> SweepResult:
    """Evaluate every grid point and gather the records in (drive, hopping) index order"""
    if workers is None:
        workers = settings.workers
    points = config.grid.points()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        check_truncation(config.params.at_point(config.grid.drive.max, 0.0))
    for w in caught:
        logger.warning(str(w.message))

    log = None
    done: Dict[Tuple[int, int], PointRecord] = {}
    point_dir = None
    if checkpoint_dir is not None:
        log = CheckpointLog(checkpoint_dir, config)
        if resume:
            done = log.load()
            logger.info("Resuming sweep: %d of %d points already done", len(done), len(points))
        elif log.path.exists():
            log.path.unlink()
        log.start()
        point_dir = Path(checkpoint_dir)

    pending = [p for p in points if (p[0], p[1]) not in done]
    logger.info("Sweep '%s': %d points, %d pending, %d workers", config.name, len(points), len(pending), workers)
    records = dict(done)

    def finish(record: PointRecord) -> None:
        records[record.flat_index] = record
        if log is not None:
            log.append(record)

    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(evaluate_point, config, p, point_dir, resume) for p in pending]
            for future in as_completed(futures):
                finish(future.result())
    else:
        for p in pending:
            finish(evaluate_point(config, p, point_dir, resume))

    ordered = [records[(p[0], p[1])] for p in points]
    result = SweepResult(config=config, records=ordered)
    if result.failures:
        logger.warning("%d of %d points failed", len(result.failures), len(ordered))
    return result
