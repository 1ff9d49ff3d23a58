"""
Kernel functions ``k(x, t)`` on real vectors, their Gram matrices and the derivative in the second argument.

Every entry point funnels into :func:`cross_gram` (or :func:`grad2_matrix`), so single evaluations and matrix assembly
share one code path and ``k(x, t) == k(t, x)`` holds bit for bit.
"""
from __future__ import annotations

import typing
from dataclasses import dataclass

import numpy as np

from rkhs_confidence import errors, utils
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    UNKNOWN_FAMILY = "Kernel family {} is not one of: {}."
    POSITIVE_PARAMETER = "Kernel parameter {} must be positive, got {}."


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

GAUSSIAN_RBF = "gaussian-rbf"
POLYNOMIAL = "polynomial"
LINEAR = "linear"
EXPONENTIAL = "exponential"
FAMILIES = (GAUSSIAN_RBF, POLYNOMIAL, LINEAR, EXPONENTIAL)


@dataclass(frozen=True)
class KernelSpec:
    """
    :param family: one of ``gaussian-rbf``, ``polynomial``, ``linear``, ``exponential``
    :param input_dim: dimension ``d`` of the covariates
    :param gamma: bandwidth of ``gaussian-rbf`` ``exp(-gamma * |x - t|^2)`` and rate of ``exponential``
           ``exp(gamma * <x, t>)``
    :param degree: degree of ``polynomial`` ``(scale * <x, t> + offset) ** degree``
    :param offset: additive constant of ``polynomial``
    :param scale: multiplier of the inner product in ``polynomial``
    """
    family: str = GAUSSIAN_RBF
    input_dim: int = 1
    gamma: float = 0.5
    degree: int = 2
    offset: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolationError("a known kernel family",
                                         ErrorMsg.UNKNOWN_FAMILY.format(self.family, ", ".join(FAMILIES)))
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise ContractViolationError("input_dim >= 1", self.input_dim)
        if self.family in (GAUSSIAN_RBF, EXPONENTIAL) and not self.gamma > 0:
            raise ContractViolationError("gamma > 0", ErrorMsg.POSITIVE_PARAMETER.format("gamma", self.gamma))
        if self.family == POLYNOMIAL:
            if int(self.degree) != self.degree or self.degree < 1:
                raise ContractViolationError("an integer degree >= 1", self.degree)
            if self.offset < 0:
                raise ContractViolationError("offset >= 0", self.offset)
            if not self.scale > 0:
                raise ContractViolationError("scale > 0", ErrorMsg.POSITIVE_PARAMETER.format("scale", self.scale))

    @property
    def is_radial(self) -> bool:
        # k(x, t) depends on |x - t| only, so equal covariates give identical feature vectors
        return self.family == GAUSSIAN_RBF

    def __str__(self):
        if self.family in (GAUSSIAN_RBF, EXPONENTIAL):
            return f"{self.family}(gamma={self.gamma!r}, d={self.input_dim})"
        if self.family == POLYNOMIAL:
            return (f"{self.family}(degree={self.degree}, offset={self.offset!r}, scale={self.scale!r}, "
                    f"d={self.input_dim})")
        return f"{self.family}(d={self.input_dim})"


def check_points(spec: KernelSpec, points: typing.Any, name: str) -> np.ndarray:
    arr = utils.as_points(points, name)
    # a flat vector is a single point when the kernel lives in more than one dimension
    if spec.input_dim > 1 and np.ndim(points) == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != spec.input_dim:
        raise ContractViolationError(f"{name} of dimension {spec.input_dim}",
                                     ErrorMsg.DIMENSION_MISMATCH.format(arr.shape[1], spec.input_dim))
    return arr


def _apply(spec: KernelSpec, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    if spec.family == GAUSSIAN_RBF:
        diff = xs[:, np.newaxis, :] - zs[np.newaxis, :, :]
        return np.exp(-spec.gamma * np.einsum("ijk,ijk->ij", diff, diff))
    inner = xs @ zs.T
    if spec.family == LINEAR:
        return inner
    if spec.family == POLYNOMIAL:
        return (spec.scale * inner + spec.offset) ** spec.degree
    return np.exp(spec.gamma * inner)


def cross_gram(spec: KernelSpec, xs: typing.Any, zs: typing.Any) -> np.ndarray:
    """
    Rectangular kernel matrix with entries ``k(xs[i], zs[j])``.
    :raises ContractViolationError: if either point set does not have dimension ``spec.input_dim``
    """
    return _apply(spec, check_points(spec, xs, "xs"), check_points(spec, zs, "zs"))


def gram(spec: KernelSpec, points: typing.Any) -> np.ndarray:
    """Symmetric ``n x n`` Gram matrix ``k(x_i, x_j)``."""
    xs = check_points(spec, points, "points")
    g = _apply(spec, xs, xs)
    return 0.5 * (g + g.T)


def diagonal(spec: KernelSpec, points: typing.Any) -> np.ndarray:
    """The values ``k(x_i, x_i)`` without assembling the Gram matrix."""
    xs = check_points(spec, points, "points")
    if spec.family == GAUSSIAN_RBF:
        return np.ones(xs.shape[0])
    sq = np.einsum("ij,ij->i", xs, xs)
    if spec.family == LINEAR:
        return sq
    if spec.family == POLYNOMIAL:
        return (spec.scale * sq + spec.offset) ** spec.degree
    return np.exp(spec.gamma * sq)


def k_eval(spec: KernelSpec, x: typing.Any, x2: typing.Any) -> float:
    """Kernel value ``k(x, x2)`` of two single points."""
    a = utils.as_point(x, spec.input_dim).reshape(1, -1)
    b = utils.as_point(x2, spec.input_dim).reshape(1, -1)
    return float(_apply(spec, a, b)[0, 0])


def grad2_matrix(spec: KernelSpec, xs: typing.Any, x0: typing.Any) -> np.ndarray:
    """
    Row ``i`` holds the gradient of ``t -> k(xs[i], t)`` at ``t = x0``.
    :returns: ``n x d`` array
    """
    arr = check_points(spec, xs, "xs")
    t = utils.as_point(x0, spec.input_dim).reshape(1, -1)
    if spec.family == LINEAR:
        return arr.copy()
    if spec.family == GAUSSIAN_RBF:
        diff = arr - t
        k = np.exp(-spec.gamma * np.einsum("ij,ij->i", diff, diff))
        return 2.0 * spec.gamma * diff * k[:, np.newaxis]
    inner = (arr @ t.T).ravel()
    if spec.family == POLYNOMIAL:
        factor = spec.degree * spec.scale * (spec.scale * inner + spec.offset) ** (spec.degree - 1)
        return factor[:, np.newaxis] * arr
    return spec.gamma * np.exp(spec.gamma * inner)[:, np.newaxis] * arr


def k_grad2(spec: KernelSpec, x: typing.Any, x0: typing.Any) -> np.ndarray:
    """Gradient of ``t -> k(x, t)`` at ``t = x0`` as a flat vector of length ``d``."""
    return grad2_matrix(spec, utils.as_point(x, spec.input_dim).reshape(1, -1), x0)[0]
