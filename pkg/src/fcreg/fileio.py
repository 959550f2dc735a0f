"""
Reading and writing series, sample panels, operators and sidecars.

Series CSV: first row holds the grid nodes, every further row one observation
in time order. Operator CSV: first row holds the domain nodes, first column
the codomain nodes, the body is the kernel. Numbers are written with repr so
every double reads back bit-identical.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import yaml

from .densities import SamplePanel
from .errors import DataError
from .fgrid import Fn, FnSeries, Grid, LinOp

logger = logging.getLogger(__name__)


def _format_float(value) -> str:
    # shortest round-trip text, also for numpy scalars
    return repr(float(value))


def _read_numeric_csv(path: Path, what: str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} file not found: {path}")
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot parse {what} file {path}: {e}")
    for col in frame.columns:
        if not pd.api.types.is_numeric_dtype(frame[col]):
            coerced = pd.to_numeric(frame[col], errors="coerce")
            bad = coerced.isna() & frame[col].notna()
            if bad.any():
                row = int(np.flatnonzero(bad.to_numpy())[0])
                raise DataError(f"{path}: non-numeric value '{frame.iat[row, col]}' at row {row + 1}, column {col + 1}")
            frame[col] = coerced
    if frame.isna().any().any():
        row, col = np.argwhere(frame.isna().to_numpy())[0]
        raise DataError(f"{path}: missing value at row {row + 1}, column {col + 1}")
    return frame.to_numpy(dtype=float)


def read_series(path: Path) -> FnSeries:
    values = _read_numeric_csv(path, "Series")
    if values.shape[0] < 2:
        raise DataError(f"{path}: a series file needs the node row and at least one observation")
    grid = Grid.from_nodes(values[0])
    return FnSeries(grid, values[1:])


def write_series(series: FnSeries, path: Path) -> Path:
    frame = pd.DataFrame(np.vstack([series.grid.nodes, series.values]))
    frame.to_csv(path, header=False, index=False, float_format=_format_float)
    return Path(path)


def read_fn(path: Path) -> Fn:
    """A single function stored in the series format"""
    series = read_series(path)
    if series.T != 1:
        raise DataError(f"{path}: expected exactly one function, found {series.T}")
    return series[0]


def write_fn(f: Fn, path: Path) -> Path:
    return write_series(FnSeries(f.grid, f.values[np.newaxis, :]), path)


def read_panel(path: Path) -> SamplePanel:
    """
    Ragged CSV with one row of raw observations per period; empty cells are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Sample panel file not found: {path}")
    with open(path) as f:
        lines = [line.rstrip("\r\n") for line in f]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DataError(f"{path}: sample panel is empty")
    width = max(len(line.split(",")) for line in lines)
    frame = pd.read_csv(path, header=None, names=range(width), dtype=str, skip_blank_lines=False)
    frame = frame.iloc[:len(lines)]

    samples = []
    for row_index, row in frame.iterrows():
        cells = row.dropna().str.strip()
        cells = cells[cells != ""]
        values = pd.to_numeric(cells, errors="coerce")
        if values.isna().any():
            col = values.index[values.isna()][0]
            raise DataError(f"{path}: non-numeric value '{cells[col]}' at row {row_index + 1}, column {col + 1}")
        if values.empty:
            raise DataError(f"{path}: period at row {row_index + 1} has no observations")
        samples.append(values.to_numpy(dtype=float))
    return SamplePanel(samples)


def write_operator(op: LinOp, path: Path) -> Path:
    body = np.column_stack([op.codomain.nodes, op.kernel])
    header = np.concatenate([[np.nan], op.domain.nodes])
    frame = pd.DataFrame(np.vstack([header, body]))
    frame.to_csv(path, header=False, index=False, float_format=_format_float, na_rep="")
    return Path(path)


def load_operator(path: Path) -> LinOp:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Operator file not found: {path}")
    frame = pd.read_csv(path, header=None, float_precision="round_trip")
    values = frame.to_numpy(dtype=float)
    if values.shape[0] < 3 or values.shape[1] < 3:
        raise DataError(f"{path}: operator file is too small")
    if np.isnan(values[1:, :]).any() or np.isnan(values[0, 1:]).any():
        raise DataError(f"{path}: operator file has missing entries")
    domain = Grid.from_nodes(values[0, 1:])
    codomain = Grid.from_nodes(values[1:, 0])
    return LinOp(domain, codomain, values[1:, 1:])


def write_yaml(data: Dict, path: Path) -> Path:
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=True)
    return Path(path)


def read_yaml(path: Path) -> Dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Metadata file not found: {path}")
    with open(path) as f:
        return yaml.safe_load(f) or {}


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=_format_float)
    return Path(path)


def export_fit(result, output_dir: Path, eigen: Optional[pd.DataFrame] = None,
               extra_metadata: Optional[Dict] = None) -> List[Path]:
    """Write the estimated operators, intercept, residuals and a metadata sidecar"""
    output_dir = Path(output_dir)
    written = [
        write_operator(result.f_N, output_dir / "f_N.csv"),
        write_operator(result.f_S, output_dir / "f_S.csv"),
        write_operator(result.f_total, output_dir / "f_total.csv"),
        write_fn(result.intercept, output_dir / "intercept.csv"),
        write_series(result.residuals, output_dir / "residuals.csv"),
    ]
    if eigen is not None:
        written.append(write_frame(eigen, output_dir / "eigen.csv"))
    grid = result.f_total.domain
    metadata = {
        "kappa": result.config.kappa,
        "d_N": result.config.d_N,
        "K": result.K,
        "K_S": result.K_S,
        "T": result.T,
        "centered": result.config.centered,
        "a1": result.config.a1,
        "a2_exp": result.config.a2_exp,
        "k_scaling": result.config.k_scaling,
        "eigenvalues": [float(v) for v in result.split.acov.eig_D.eigenvalues[:result.K]],
        "grid": {"a1": grid.a1, "a2": grid.a2, "n": grid.n},
    }
    metadata.update(extra_metadata or {})
    written.append(write_yaml(metadata, output_dir / "metadata.yaml"))
    logger.info(f"Wrote fit artifacts to {output_dir}")
    return written
