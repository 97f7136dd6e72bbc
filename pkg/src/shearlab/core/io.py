"""Field serialization and CSV report emission."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid, SpectralField

logger = logging.getLogger(__name__)

MAGIC = b"SHLBFLD1"
HEADER_DTYPE = np.dtype([("magic", "S8"), ("n_z", "<i8"), ("n_v", "<i8"), ("L_v", "<f8")])
CSV_FIELD_LIMIT = 64 * 128

PathLike = Union[str, Path]


def write_field(path: PathLike, f: SpectralField) -> Path:
    """Write ``f`` as a 32-byte header plus row-major little-endian complex128 data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([(MAGIC, f.grid.n_z, f.grid.n_v, f.grid.L_v)], dtype=HEADER_DTYPE)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())
    logger.debug(f"Wrote field {f.grid.shape} to {path}")
    return path


def read_field(path: PathLike, dealias_fraction: float = 2.0 / 3.0) -> SpectralField:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise InvalidInputError(f"{path}: truncated header")
    header = np.frombuffer(raw[: HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if bytes(header["magic"]) != MAGIC:
        raise InvalidInputError(f"{path}: not a ShearLab field file")
    grid = Grid(int(header["n_z"]), int(header["n_v"]), float(header["L_v"]), dealias_fraction)
    data = np.frombuffer(raw[HEADER_DTYPE.itemsize:], dtype="<c16")
    if data.size != grid.n_z * grid.n_v:
        raise InvalidInputError(f"{path}: expected {grid.n_z * grid.n_v} coefficients, found {data.size}")
    return SpectralField(grid, data.reshape(grid.shape).astype(complex))


def export_field_csv(path: PathLike, f: SpectralField) -> Path:
    """CSV rows (k, eta, re, im) for small grids."""
    if f.grid.n_z * f.grid.n_v > CSV_FIELD_LIMIT:
        raise InvalidInputError(f"grid {f.grid.shape} too large for CSV export")
    K, E = f.grid.mesh
    rows = np.column_stack([K.ravel(), E.ravel(), f.coeffs.real.ravel(), f.coeffs.imag.ravel()])
    return write_csv(path, ["k", "eta", "re", "im"], rows)


def write_csv(path: PathLike, header: Sequence[str], rows: Union[np.ndarray, Iterable[Sequence[float]]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.atleast_2d(np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=float))
    if data.size == 0:
        data = np.empty((0, len(header)))
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return path


def read_csv(path: PathLike) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """CSV with mixed text and numeric columns; floats keep full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def cell(x):
        if isinstance(x, (float, np.floating)):
            return f"{x:.17g}"
        return str(x)

    lines = [[cell(x) for x in row] for row in rows]
    data = np.array(lines, dtype=str) if lines else np.empty((0, len(header)), dtype=str)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%s")
    return path
