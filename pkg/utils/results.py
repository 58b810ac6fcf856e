"""
CSV / JSON writers for sweep results and state-evolution trajectories.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Union

import numpy as np

from exceptions import InvalidParameterError
from models.analysis import SETrajectory
from models.power_allocation import PowerAllocation
from models.simulation import SweepResult

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "ebn0_db", "trials", "esec_mean", "ber_mean", "cwer", "cwer_ci_lo", "cwer_ci_hi", "avg_iters",
)


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def write_sweep_csv(result: SweepResult, path: Union[str, Path]) -> Path:
    """One row per Eb/N0 point with the documented columns."""
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for point in result.points:
            writer.writerow(point.to_row())
    logger.info(f"Wrote {len(result.points)} sweep points to {path}")
    return path


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(to_plain(payload), f, indent=2)
    logger.info(f"Wrote {path}")
    return path


def write_sweep(result: SweepResult, path: Union[str, Path], include_records: bool = None) -> Path:
    """
    Write a sweep as CSV or JSON depending on the file extension.

    Raises:
        InvalidParameterError: For extensions other than .csv and .json
    """
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return write_sweep_csv(result, path)
    if suffix == ".json":
        return write_json(result.to_dict(include_records), path)
    raise InvalidParameterError(f"Unsupported output file {path}", "Use a .csv or .json path")


def trajectory_rows(trajectory: SETrajectory) -> Iterable[dict]:
    for t, tau2, x in trajectory.rows():
        yield {"t": t, "tau2": tau2, "x": "" if x is None else x}


def write_trajectory_csv(trajectory: SETrajectory, path_or_file) -> None:
    """(t, tau2, x) rows; ``path_or_file`` may be an open text stream."""
    if hasattr(path_or_file, "write"):
        _write_rows(trajectory, path_or_file)
        return
    path = Path(path_or_file)
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        _write_rows(trajectory, f)


def _write_rows(trajectory: SETrajectory, f) -> None:
    writer = csv.DictWriter(f, fieldnames=("t", "tau2", "x"))
    writer.writeheader()
    writer.writerows(trajectory_rows(trajectory))


def write_allocation_csv(pa: PowerAllocation, path_or_file) -> None:
    """(section, power) rows, sections numbered from 1."""
    if hasattr(path_or_file, "write"):
        _write_allocation(pa, path_or_file)
        return
    path = Path(path_or_file)
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        _write_allocation(pa, f)


def _write_allocation(pa: PowerAllocation, f) -> None:
    writer = csv.writer(f)
    writer.writerow(("section", "power"))
    writer.writerows((ell + 1, float(p)) for ell, p in enumerate(pa.powers))


def to_json_text(payload: Any) -> str:
    return json.dumps(to_plain(payload), indent=2)
