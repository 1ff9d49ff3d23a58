"""
Reads datasets from CSV files and writes them back.

Expected layout, header first::

    x1,x2,...,xd,y[,w]

``w`` is an optional column of observation weights. Every cell must be a finite number.
"""
from __future__ import annotations

import logging
import typing

import numpy as np

from rkhs_confidence import errors
from rkhs_confidence.report import write_rows
from rkhs_confidence.solver import Dataset, REGRESSION
from rkhs_confidence.utils import CsvLoader, CouldNotLoadFileError, ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    ROW_REJECTED = "Line {} of {} rejected: {}"
    WRONG_CELL_COUNT = "expected {} cells, got {}"
    NOT_A_NUMBER = "cell {!r} is not a finite number"
    COUNT_ROWS = "{} rows of data found in {}, d={}."
    MEDIAN_SUBSAMPLE = "Median heuristic uses the first {} of {} points."


class CannotAccessDataError(CouldNotLoadFileError):
    """The data file {} could not be accessed or parsed."""

    def __init__(self, path: str):
        super().__init__(path)


class MalformedHeaderError(ContractViolationError):
    """Header of {} must read x1,...,xd,y with an optional w column, got {} instead."""

    def __init__(self, path: str, header):
        super().__init__(path, header)


class MalformedDataError(ContractViolationError):
    """The file {} has malformed rows at lines {}."""

    def __init__(self, path: str, lines: typing.List[int]):
        self.__lines = list(lines)
        super().__init__(path, ", ".join(str(line) for line in lines) or "none (no data rows)")

    @property
    def lines(self) -> typing.List[int]:
        return self.__lines


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

# rows beyond this many are ignored by the median heuristic, all pairs of them are formed
MEDIAN_HEURISTIC_LIMIT = 2000


def _parse_header(path: str, header: typing.List[str]) -> typing.Tuple[int, bool]:
    names = [cell.strip().lower() for cell in header]
    weighted = bool(names) and names[-1] == "w"
    core = names[:-1] if weighted else names
    dim = len(core) - 1
    if dim < 1 or core[-1] != "y" or core[:-1] != [f"x{j}" for j in range(1, dim + 1)]:
        raise MalformedHeaderError(path, ",".join(header))
    return dim, weighted


def load_csv(path: str, task: str = REGRESSION) -> Dataset:
    """
    :raises CannotAccessDataError: if the file cannot be opened or decoded
    :raises MalformedHeaderError: if the header is not ``x1,...,xd,y[,w]``
    :raises MalformedDataError: listing every line with a missing or non-numeric cell
    """
    logger = logging.getLogger(__name__)
    rows: typing.List[typing.List[float]] = []
    bad_lines: typing.List[int] = []
    try:
        with CsvLoader().load(path) as reader:
            header = next(reader, None)
            if header is None:
                raise MalformedHeaderError(path, "an empty file")
            dim, weighted = _parse_header(path, header)
            width = dim + 1 + int(weighted)
            for row in reader:
                line = reader.line_num
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != width:
                    logger.warning(ErrorMsg.ROW_REJECTED.format(line, path,
                                                                ErrorMsg.WRONG_CELL_COUNT.format(width, len(row))))
                    bad_lines.append(line)
                    continue
                try:
                    values = [float(cell) for cell in row]
                except ValueError:
                    values = None
                if values is None or not all(np.isfinite(values)):
                    offending = next(cell for cell in row if not _finite(cell))
                    logger.warning(ErrorMsg.ROW_REJECTED.format(line, path, ErrorMsg.NOT_A_NUMBER.format(offending)))
                    bad_lines.append(line)
                    continue
                rows.append(values)
    except CouldNotLoadFileError as err:
        raise CannotAccessDataError(path) from err
    if bad_lines or not rows:
        raise MalformedDataError(path, bad_lines)

    table = np.array(rows)
    logger.info(ErrorMsg.COUNT_ROWS.format(table.shape[0], path, dim))
    weights = table[:, dim + 1] if weighted else None
    return Dataset(table[:, :dim], table[:, dim], task, weights)


def _finite(cell: str) -> bool:
    try:
        return bool(np.isfinite(float(cell)))
    except ValueError:
        return False


def save_csv(dataset: Dataset, path: str) -> None:
    """Write ``dataset`` so that :func:`load_csv` reads back identical values. Uniform weights are left out."""
    weighted = not np.allclose(dataset.weights, 1.0 / dataset.n, rtol=0.0, atol=0.0)
    header = [f"x{j}" for j in range(1, dataset.dim + 1)] + ["y"] + (["w"] if weighted else [])
    rows = []
    for i in range(dataset.n):
        row = [repr(float(v)) for v in dataset.xs[i]] + [repr(float(dataset.ys[i]))]
        if weighted:
            row.append(repr(float(dataset.weights[i])))
        rows.append(row)
    write_rows(path, header, rows)


def median_heuristic_gamma(data: Dataset) -> float:
    """
    ``1 / median |x_i - x_j|^2`` over all pairs ``i < j``.
    :raises ContractViolationError: for fewer than two points or when all points coincide
    """
    if data.n < 2:
        raise ContractViolationError("at least two points", data.n)
    xs = data.xs
    if data.n > MEDIAN_HEURISTIC_LIMIT:
        logging.getLogger(__name__).info(ErrorMsg.MEDIAN_SUBSAMPLE.format(MEDIAN_HEURISTIC_LIMIT, data.n))
        xs = xs[:MEDIAN_HEURISTIC_LIMIT]
    i, j = np.triu_indices(xs.shape[0], k=1)
    diff = xs[i] - xs[j]
    median = float(np.median(np.einsum("ij,ij->i", diff, diff)))
    if median <= 0:
        raise ContractViolationError("points that are not all identical", f"median squared distance {median}")
    return 1.0 / median
