"""
Convex, twice differentiable losses ``L(x, y, t)`` with their first and second derivative in ``t``.

None of the supported losses depends on ``x``; the argument is kept so that the signatures read like the risk they
enter. All functions broadcast over ``y`` and ``t``.
"""
from __future__ import annotations

import math
import typing
from dataclasses import dataclass

import numpy as np

from rkhs_confidence import errors
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    UNKNOWN_FAMILY = "Loss family {} is not one of: {}."
    LABELS_OUTSIDE_DOMAIN = "{} labels outside {{-1, +1}}, first offending value {}"


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

LS_REGRESSION = "ls-regression"
LOGISTIC_REGRESSION = "logistic-regression"
LS_CLASSIFICATION = "ls-classification"
LOGISTIC_CLASSIFICATION = "logistic-classification"
# log(1 + exp(y - t)) taken at face value rather than in margin form
LOGISTIC_CLASSIFICATION_LITERAL = "logistic-classification-literal"

FAMILIES = (LS_REGRESSION, LOGISTIC_REGRESSION, LS_CLASSIFICATION, LOGISTIC_CLASSIFICATION,
            LOGISTIC_CLASSIFICATION_LITERAL)
CLASSIFICATION_FAMILIES = (LS_CLASSIFICATION, LOGISTIC_CLASSIFICATION, LOGISTIC_CLASSIFICATION_LITERAL)


@dataclass(frozen=True)
class LossSpec:
    """
    :param family: one of :data:`FAMILIES`
    :param sigma: scale of ``logistic-regression``, ignored by the other families
    """
    family: str = LS_REGRESSION
    sigma: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolationError("a known loss family",
                                         ErrorMsg.UNKNOWN_FAMILY.format(self.family, ", ".join(FAMILIES)))
        if self.family == LOGISTIC_REGRESSION and not self.sigma > 0:
            raise ContractViolationError("sigma > 0", self.sigma)

    @property
    def is_classification(self) -> bool:
        return self.family in CLASSIFICATION_FAMILIES

    def __str__(self):
        if self.family == LOGISTIC_REGRESSION:
            return f"{self.family}(sigma={self.sigma!r})"
        return self.family


def check_labels(spec: LossSpec, y: typing.Any) -> np.ndarray:
    """
    :raises ContractViolationError: if ``spec`` is a classification loss and a label is not -1 or +1
    """
    arr = np.asarray(y, dtype=float)
    if spec.is_classification:
        bad = np.flatnonzero(np.abs(arr.ravel()) != 1.0)
        if bad.size:
            raise ContractViolationError("labels in {-1, +1}",
                                         ErrorMsg.LABELS_OUTSIDE_DOMAIN.format(bad.size, arr.ravel()[bad[0]]))
    return arr


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _log_cosh(z: np.ndarray) -> np.ndarray:
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _scalar_or_array(value: np.ndarray) -> typing.Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def loss(spec: LossSpec, x: typing.Any, y: typing.Any, t: typing.Any) -> typing.Union[float, np.ndarray]:
    """Value of the loss, nonnegative."""
    y = check_labels(spec, y)
    t = np.asarray(t, dtype=float)
    if spec.family == LS_REGRESSION:
        value = (y - t) ** 2
    elif spec.family == LOGISTIC_REGRESSION:
        # -sigma * log(4 e^u / (1 + e^u)^2) with u = (y - t) / sigma
        value = 2.0 * spec.sigma * _log_cosh((y - t) / (2.0 * spec.sigma))
    elif spec.family == LS_CLASSIFICATION:
        value = (1.0 - y * t) ** 2
    elif spec.family == LOGISTIC_CLASSIFICATION:
        value = np.logaddexp(0.0, -y * t)
    else:
        value = np.logaddexp(0.0, y - t)
    return _scalar_or_array(value)


def dloss(spec: LossSpec, x: typing.Any, y: typing.Any, t: typing.Any) -> typing.Union[float, np.ndarray]:
    """First derivative of the loss in ``t``."""
    y = check_labels(spec, y)
    t = np.asarray(t, dtype=float)
    if spec.family == LS_REGRESSION:
        value = -2.0 * (y - t)
    elif spec.family == LOGISTIC_REGRESSION:
        value = -np.tanh((y - t) / (2.0 * spec.sigma))
    elif spec.family == LS_CLASSIFICATION:
        value = -2.0 * y * (1.0 - y * t)
    elif spec.family == LOGISTIC_CLASSIFICATION:
        value = -y * _sigmoid(-y * t)
    else:
        value = -_sigmoid(y - t)
    return _scalar_or_array(value)


def ddloss(spec: LossSpec, x: typing.Any, y: typing.Any, t: typing.Any) -> typing.Union[float, np.ndarray]:
    """Second derivative of the loss in ``t``, nonnegative."""
    y = check_labels(spec, y)
    t = np.asarray(t, dtype=float)
    if spec.family == LS_REGRESSION:
        value = np.full(np.broadcast(y, t).shape, 2.0)
    elif spec.family == LOGISTIC_REGRESSION:
        # sech^2 through 1 - tanh^2 loses everything in the tails, cosh does not
        z = (y - t) / (2.0 * spec.sigma)
        with np.errstate(over="ignore"):
            value = 1.0 / (2.0 * spec.sigma * np.cosh(z) ** 2)
    elif spec.family == LS_CLASSIFICATION:
        value = 2.0 * y ** 2 * np.ones_like(t)
    elif spec.family == LOGISTIC_CLASSIFICATION:
        s = _sigmoid(y * t)
        value = y ** 2 * s * (1.0 - s)
    else:
        s = _sigmoid(y - t)
        value = s * (1.0 - s)
    return _scalar_or_array(value)
