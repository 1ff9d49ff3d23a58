"""
Plain-text artifacts: ``key = value`` summaries and CSV tables.

Summary grammar, one entry per line::

    # comment
    key = value

Vectors are comma-separated, matrix rows are separated by ``;``. Reals are written in their shortest form that parses
back to the same float.
"""
from __future__ import annotations

import csv
import typing

import numpy as np

from rkhs_confidence import errors
from rkhs_confidence.utils import TextLoader, create_and_open, ContractViolationError


class ErrorMsg(errors.ErrorMsgBase):
    BAD_SUMMARY_LINE = "a 'key = value' line"
    DUPLICATE_KEY = "unique keys"


Value = typing.Union[str, int, float, bool, None, typing.Sequence, np.ndarray]


def format_real(x: typing.Any) -> str:
    """``repr`` of the float, so ``float(format_real(x)) == x`` for every finite ``x``."""
    return repr(float(x))


def format_value(value: Value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    if isinstance(value, str):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return format_real(arr)
    if arr.ndim == 1:
        return ", ".join(format_real(v) for v in arr)
    return "; ".join(", ".join(format_real(v) for v in row) for row in arr)


def write_summary(stream: typing.TextIO,
                  items: typing.Iterable[typing.Tuple[str, Value]],
                  comments: typing.Iterable[str] = ()) -> None:
    for comment in comments:
        stream.write(f"# {comment}\n")
    for key, value in items:
        stream.write(f"{key} = {format_value(value)}\n")


def save_summary(path: str,
                 items: typing.Iterable[typing.Tuple[str, Value]],
                 comments: typing.Iterable[str] = ()) -> None:
    with create_and_open(path, "w") as file:
        write_summary(file, items, comments)


def parse_summary(text: str) -> typing.Dict[str, str]:
    """Inverse of :func:`write_summary` on the text level; values stay strings."""
    entries: typing.Dict[str, str] = {}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, separator, value = stripped.partition("=")
        if not separator or not key.strip():
            raise ContractViolationError(ErrorMsg.BAD_SUMMARY_LINE, line)
        key = key.strip()
        if key in entries:
            raise ContractViolationError(ErrorMsg.DUPLICATE_KEY, key)
        entries[key] = value.strip()
    return entries


def load_summary(path: str) -> typing.Dict[str, str]:
    with TextLoader().load(path) as text:
        return parse_summary(text)


def parse_reals(value: str) -> np.ndarray:
    """A vector or a ``;``-separated matrix as written by :func:`format_value`."""
    rows = [[float(cell) for cell in row.split(",")] for row in value.split(";")]
    return np.array(rows[0] if len(rows) == 1 else rows)


def write_rows(path: str, header: typing.Sequence[str], rows: typing.Iterable[typing.Sequence[typing.Any]]) -> None:
    """CSV with ``header`` first; reals via :func:`format_real`, booleans as ``0``/``1``."""
    with create_and_open(path, "w") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def _cell(value: typing.Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    return str(value)
