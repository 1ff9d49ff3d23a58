"""
Contains universally useful functions
"""
from __future__ import annotations

import abc
import csv
import os
import typing
from contextlib import contextmanager
from typing import TextIO, Optional

import numpy as np

from rkhs_confidence import errors

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    POINTS_SHAPE = "points must form a 1-D or 2-D array, got {} dimensions"


class ExpectedValueError(TypeError):
    """Expected {}, got {} instead."""

    def __init__(self, expected_value, actual_value):
        self.__expected_value = expected_value
        self.__actual_value = actual_value
        try:
            self.__doc__ = self.__doc__.format(expected_value, actual_value)
        except (KeyError, IndexError):
            pass
        super().__init__(self.__doc__)

    @property
    def expected_value(self):
        return self.__expected_value

    @property
    def actual_value(self):
        return self.__actual_value


# A broken precondition is as much a wrong value as it is a wrong type
class ContractViolationError(ExpectedValueError, ValueError):
    """Contract violated - expected {}, got {} instead."""

    def __init__(self, expected_value, actual_value):
        super().__init__(expected_value, actual_value)


class CouldNotLoadFileError(Exception):
    """The file {} could not be accessed."""

    def __init__(self, path: str):
        self.__path = path
        self.__doc__ = self.__doc__.format(self.__path)
        super().__init__(self.__doc__)

    @property
    def path(self):
        return self.__path


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""


def expand_path(path: str) -> str:
    """
    Expand all %variables%, ~/home-directories and relative parts in the path. Return the expanded path.
    It does not use os.path.abspath() because it treats current script directory as root.
    """
    return os.path.realpath(
        os.path.expanduser(
            os.path.expandvars(path)
        )
    )


def as_points(points: typing.Any, name: str = "points") -> np.ndarray:
    """
    Coerce ``points`` into an ``n x d`` float array. A flat vector is read as ``n`` points of dimension 1,
    a scalar as a single point of dimension 1.
    :raises ContractViolationError: if the entries are not finite or the array has more than two axes.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim > 2:
        raise ContractViolationError(f"{name} as an n x d array", ErrorMsg.POINTS_SHAPE.format(arr.ndim))
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"finite {name}", ErrorMsg.NOT_FINITE.format(name))
    return arr


def as_point(point: typing.Any, dim: int) -> np.ndarray:
    """
    Coerce a single point into a flat float vector of length ``dim``.
    :raises ContractViolationError: on dimension mismatch or non-finite entries.
    """
    arr = np.atleast_1d(np.asarray(point, dtype=float)).ravel()
    if arr.size != dim:
        raise ContractViolationError(f"a point of dimension {dim}", ErrorMsg.DIMENSION_MISMATCH.format(arr.size, dim))
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("a finite point", ErrorMsg.NOT_FINITE.format("point"))
    return arr


def create_and_open(filename: str, mode: str) -> TextIO:
    directory = os.path.dirname(filename)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return open(filename, mode, encoding="UTF-8", newline="")


class FileLoader:
    # every subclass decides what an opened file turns into
    @abc.abstractmethod
    def _load_file(self, file: TextIO):
        pass

    @contextmanager
    def load(self, path: Optional[str]) -> None:
        """
        Loads the file into context manager and catches exceptions thrown while doing so.
        It catches errors specific to the implementation first, then tries to catch more general IO errors.
        :return: It is not specified what kind of object will be returned when opened. Left up to implementation.
        """
        if path is None:
            raise CouldNotLoadFileError(path)
        try:
            file = open(expand_path(path), encoding='UTF-8', newline='')
        except OSError as err:
            raise CouldNotLoadFileError(path) from err
        # readers are lazy, so decoding and parsing errors surface while the caller iterates
        try:
            with file:
                yield self._load_file(file)
        except (OSError, UnicodeDecodeError, csv.Error) as err:
            raise CouldNotLoadFileError(path) from err


class CsvLoader(FileLoader):
    def _load_file(self, file: TextIO):
        try:
            # strict parameter throws csv.Error if parsing fails
            return csv.reader(file, delimiter=',', quotechar='"', strict=True)
        except csv.Error as err:
            raise CouldNotLoadFileError(file.name) from err


class TextLoader(FileLoader):
    def _load_file(self, file: TextIO):
        return file.read()
