"""
CSV and JSON emission of sweep results.

Both files carry the same values and the resolved config; the CSV holds the
config in leading "#" lines. Floats are written as their shortest round-trip
decimal (Python repr); missing values are empty CSV cells and JSON nulls.
No timestamps are written, so reruns produce identical bytes.
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union
import json
import logging

import pandas as pd

from drivencavity import __version__
from drivencavity.errors import ConfigError
from drivencavity.models.schemas import OutputFormat, PointRecord, SweepConfig, SweepResult

logger = logging.getLogger(__name__)

SOFTWARE_NAME = "drivencavity"
COMMENT = "#"
CONFIG_PREFIX = f"{COMMENT} config: "

# per-site list fields and their column prefixes, in column order
_SITE_FIELDS = (
    ("density", "densities", "density"),
    ("variance", "variances", "variance"),
    ("g1_row", "g1_real", "g1_re"),
    ("g1_row", "g1_imag", "g1_im"),
    ("g2_row", "g2", "g2"),
    ("level_populations", "top_level_population", "top_level"),
    ("mode_spectrum", "mode_detunings", "mode_detuning"),
)
_LEADING = ["index_drive", "index_hopping", "drive", "hopping"]
_TRAILING = ["correlation_length", "fit_residual", "converged", "residual", "min_eigenvalue",
             "truncation_error", "bond_check_change", "error"]


def csv_columns(config: SweepConfig) -> List[str]:
    """Fixed header for a config: grid coordinates, enabled per-site columns, diagnostics"""
    flags = config.observables
    columns = list(_LEADING)
    for flag, _, prefix in _SITE_FIELDS:
        if getattr(flags, flag):
            columns.extend(f"{prefix}_{j}" for j in range(config.spec.n_sites))
    columns.extend(_TRAILING)
    return columns


def format_value(value) -> str:
    """Shortest round-trip text for one cell"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(record: PointRecord, config: SweepConfig) -> Dict[str, str]:
    row = {name: format_value(getattr(record, name)) for name in _LEADING + _TRAILING}
    flags = config.observables
    for flag, field_name, prefix in _SITE_FIELDS:
        if not getattr(flags, flag):
            continue
        values = getattr(record, field_name)
        for j in range(config.spec.n_sites):
            row[f"{prefix}_{j}"] = format_value(values[j] if j < len(values) else None)
    return row


def to_frame(result: SweepResult) -> pd.DataFrame:
    """One row of preformatted strings per grid point"""
    columns = csv_columns(result.config)
    if not result.records:
        return pd.DataFrame(columns=columns)
    rows = [_row(record, result.config) for record in result.records]
    return pd.DataFrame(rows, columns=columns)


def to_document(result: SweepResult) -> Dict:
    return {
        "software": {"name": SOFTWARE_NAME, "version": __version__},
        "config": result.config.model_dump(mode="json"),
        "records": [record.model_dump(mode="json") for record in result.records],
    }


def csv_preamble(config: SweepConfig) -> List[str]:
    """Comment lines written above the CSV header"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return [f"{COMMENT} {SOFTWARE_NAME} {__version__}", CONFIG_PREFIX + payload]


def write_csv(result: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for line in csv_preamble(result.config):
            f.write(line + "\n")
        to_frame(result).to_csv(f, index=False, lineterminator="\n")
    logger.info("CSV saved to %s", path)
    return path


def write_json(result: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_document(result), f, indent=2, allow_nan=False)
        f.write("\n")
    logger.info("JSON saved to %s", path)
    return path


def emit(result: SweepResult, formats: Optional[Sequence[OutputFormat]] = None,
         out_dir: Optional[Union[str, Path]] = None, stem: Optional[str] = None) -> List[Path]:
    """Write the requested formats; defaults come from the config's output section"""
    output = result.config.output
    formats = output.formats if formats is None else formats
    out_dir = Path(output.path if out_dir is None else out_dir)
    stem = output.stem if stem is None else stem
    written = []
    for fmt in formats:
        fmt = OutputFormat(fmt)
        if fmt == OutputFormat.CSV:
            written.append(write_csv(result, out_dir / f"{stem}.csv"))
        else:
            written.append(write_json(result, out_dir / f"{stem}.json"))
    return written


def _preamble(path: Path) -> List[str]:
    lines = []
    with open(path, "r") as f:
        for line in f:
            if not line.startswith(COMMENT):
                break
            lines.append(line.rstrip("\n"))
    return lines


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read an emitted CSV back as strings, empty cells kept empty"""
    path = Path(path)
    return pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=len(_preamble(path)))


def read_csv_config(path: Union[str, Path]) -> SweepConfig:
    """Resolved config stored in an emitted CSV"""
    path = Path(path)
    for line in _preamble(path):
        if line.startswith(CONFIG_PREFIX):
            return SweepConfig.model_validate_json(line[len(CONFIG_PREFIX):])
    raise ConfigError(f"No config line in {path}")
