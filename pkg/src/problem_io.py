"""Design/response files.

CSV: design row-major (one row per observation), response as a single column.
Binary: b"KAMP0001" + n, p as little-endian int32, then the design column-major
as float64, then the response.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

import config
from src.errors import ProblemFormatError

MAGIC = b"KAMP0001"
_HEADER = np.dtype([("magic", "S8"), ("n", "<i4"), ("p", "<i4")])


def _read_numeric_csv(path):
    try:
        table = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ProblemFormatError(path, f"unreadable CSV: {e}") from e

    values = table.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raw = table.iat[row, col]
        raise ProblemFormatError(path, f"non-numeric value {raw!r} in column {col + 1}", line=int(row) + 1)
    return values.to_numpy(dtype=float)


def read_csv_problem(design_path, response_path):
    design = _read_numeric_csv(design_path)
    response = _read_numeric_csv(response_path)
    if response.ndim == 2:
        if response.shape[1] != 1:
            raise ProblemFormatError(response_path, f"response must have one column, found {response.shape[1]}")
        response = response[:, 0]
    if design.shape[0] != response.shape[0]:
        raise ValueError(
            f"design has shape {design.shape} but response has {response.shape[0]} rows"
        )
    logging.info(f"Loaded design {design.shape} from {design_path}")
    return design, response


def write_csv_problem(design, response, design_path, response_path):
    pd.DataFrame(design).to_csv(design_path, header=False, index=False, float_format=config.FLOAT_FORMAT)
    pd.DataFrame(np.asarray(response)).to_csv(response_path, header=False, index=False, float_format=config.FLOAT_FORMAT)


def write_binary_problem(design, response, path):
    design = np.asarray(design, dtype="<f8")
    response = np.asarray(response, dtype="<f8")
    n, p = design.shape
    if response.shape != (n,):
        raise ValueError(f"design has shape {design.shape} but response has shape {response.shape}")
    header = np.array([(MAGIC, n, p)], dtype=_HEADER)
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(design.tobytes(order="F"))
        f.write(response.tobytes())


def read_binary_problem(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise ProblemFormatError(path, f"file is {len(raw)} bytes, shorter than the 16-byte header")
    header = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
    if header["magic"] != MAGIC:
        raise ProblemFormatError(path, f"bad magic {bytes(header['magic'])!r}, expected {MAGIC!r}")
    n, p = int(header["n"]), int(header["p"])
    if n < 1 or p < 1:
        raise ProblemFormatError(path, f"invalid dimensions n={n}, p={p}")
    expected = _HEADER.itemsize + 8 * (n * p + n)
    if len(raw) != expected:
        raise ProblemFormatError(path, f"expected {expected} bytes for n={n}, p={p}, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.itemsize)
    design = body[: n * p].reshape((n, p), order="F").astype(float)
    response = body[n * p:].astype(float)
    return design, response


def read_problem(design_path, response_path=None):
    """Binary container when the file carries the magic, CSV pair otherwise."""
    with open(design_path, "rb") as f:
        head = f.read(len(MAGIC))
    if head == MAGIC:
        return read_binary_problem(design_path)
    if response_path is None:
        raise ValueError(f"{design_path} is not a binary problem file and no response file was given")
    return read_csv_problem(design_path, response_path)
