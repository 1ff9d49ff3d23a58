"""
Choice of the regularisation parameter by k-fold cross-validation over a grid, optionally restricted to the shrinking
window ``[lambda0, lambda0 + c / sqrt(n ln n)]`` that keeps the selected value consistent with a fixed ``lambda0``.
"""
from __future__ import annotations

import logging
import math
import typing

import numpy as np

from rkhs_confidence import errors, losses, solver
from rkhs_confidence.kernels import KernelSpec
from rkhs_confidence.losses import LossSpec
from rkhs_confidence.solver import Dataset
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    GRID_CONSTRAINED = "Grid constrained to [{}, {}]: {} of {} values kept."
    FOLD_LOSS = "lambda={}: held-out loss {}."
    SELECTED = "Cross-validation selected lambda={} out of {} candidates."


class FoldFitError(ArithmeticError):
    """Fitting cross-validation fold {} with lambda={} failed."""

    def __init__(self, fold: int, lam: float):
        self.__fold = fold
        self.__lam = lam
        self.__doc__ = self.__doc__.format(fold, lam)
        super().__init__(self.__doc__)

    @property
    def fold(self) -> int:
        return self.__fold

    @property
    def lam(self) -> float:
        return self.__lam


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

RandomSource = typing.Union[int, np.random.Generator, None]


class Selection(typing.NamedTuple):
    lam: float
    grid: typing.Tuple[float, ...]
    cv_losses: typing.Tuple[float, ...]


def constrain_grid(grid: typing.Iterable[float], lambda0: float, c: float, n: int) -> typing.List[float]:
    """
    Keep the grid values inside ``[lambda0, lambda0 + c / sqrt(n ln n)]``; ``lambda0`` itself is always kept.
    :returns: sorted, without duplicates
    """
    if not lambda0 > 0:
        raise ContractViolationError("lambda0 > 0", lambda0)
    if c < 0:
        raise ContractViolationError("c >= 0", c)
    if int(n) != n or n < 2:
        raise ContractViolationError("n >= 2", n)
    upper = lambda0 + c / math.sqrt(n * math.log(n))
    values = sorted(set(float(v) for v in grid))
    kept = sorted({lambda0} | {v for v in values if lambda0 <= v <= upper})
    logging.getLogger(__name__).debug(ErrorMsg.GRID_CONSTRAINED.format(lambda0, upper, len(kept), len(values)))
    return kept


def fold_partition(n: int, folds: int, rng: RandomSource = None) -> typing.List[np.ndarray]:
    """Shuffle ``0..n-1`` and cut it into ``folds`` contiguous pieces whose sizes differ by at most one."""
    if int(folds) != folds or folds < 2:
        raise ContractViolationError("folds >= 2", folds)
    if folds > n:
        raise ContractViolationError(f"at most {n} folds", folds)
    permutation = np.random.default_rng(rng).permutation(n)
    return np.array_split(permutation, folds)


class CrossValidation:
    """
    :param kernel: kernel of every fit
    :param loss: loss of every fit, its unregularised held-out value is the selection criterion
    :param folds: number of folds
    """

    def __init__(self, kernel: KernelSpec, loss: LossSpec, folds: int = 5):
        self.__logger = logging.getLogger(self.__class__.__name__)
        self.__kernel = kernel
        self.__loss = loss
        self.__folds = folds

    def select(self, data: Dataset, grid: typing.Iterable[float], seed: RandomSource = None) -> Selection:
        """
        :raises FoldFitError: chained from the solver error, if any fold fit fails
        :raises ContractViolationError: on an empty grid or nonpositive grid values
        """
        candidates = sorted(set(float(v) for v in grid))
        if not candidates:
            raise ContractViolationError("a nonempty grid", candidates)
        if candidates[0] <= 0:
            raise ContractViolationError("positive grid values", candidates[0])
        if len(candidates) == 1:
            return Selection(candidates[0], tuple(candidates), (math.nan,))

        partition = fold_partition(data.n, self.__folds, seed)
        totals = np.zeros(len(candidates))
        for fold, held_out in enumerate(partition):
            training = data.subset(np.setdiff1d(np.arange(data.n), held_out))
            test = data.subset(held_out)
            for position, lam in enumerate(candidates):
                try:
                    model = solver.fit(training, self.__kernel, self.__loss, lam)
                except (solver.SolverFailureError, np.linalg.LinAlgError) as err:
                    raise FoldFitError(fold, lam) from err
                # held-out points carry their weight in the full sample
                totals[position] += float(data.weights[held_out] @ losses.loss(self.__loss, test.xs, test.ys,
                                                                              model.evaluate(test.xs)))
        cv_losses = totals
        for lam, value in zip(candidates, cv_losses):
            self.__logger.debug(ErrorMsg.FOLD_LOSS.format(lam, value))
        # argmin returns the first minimum, the grid is ascending
        chosen = candidates[int(np.argmin(cv_losses))]
        self.__logger.debug(ErrorMsg.SELECTED.format(chosen, len(candidates)))
        return Selection(chosen, tuple(candidates), tuple(float(v) for v in cv_losses))


def cv_select(data: Dataset, kernel: KernelSpec, loss: LossSpec, grid: typing.Iterable[float], folds: int = 5,
              seed: RandomSource = None) -> typing.Tuple[float, typing.List[float]]:
    """
    :returns: the selected ``lambda`` and the held-out loss of every (sorted, deduplicated) grid value
    """
    selection = CrossValidation(kernel, loss, folds).select(data, grid, seed)
    return selection.lam, list(selection.cv_losses)
