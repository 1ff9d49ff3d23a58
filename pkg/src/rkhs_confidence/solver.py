"""
Regularised empirical risk minimisation in the RKHS of a kernel.

By the representer theorem the minimiser of ``sum_i w_i L(x_i, y_i, f(x_i)) + lambda * |f|_H^2`` is a kernel
expansion over the training covariates. The coefficients are found by a damped Newton method that runs in the
whitened coordinates of a pivoted Cholesky factor ``G ~ F F^T`` of the Gram matrix::

    J(c) = sum_i w_i L(x_i, y_i, (F c)_i) + lambda * |c|^2

Its Hessian ``F^T W F + 2 lambda I`` is positive definite even when ``G`` is singular, and the factor never needs the
full ``n x n`` Gram matrix, which keeps large reference fits within memory.
"""
from __future__ import annotations

import functools
import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from rkhs_confidence import errors, kernels, losses, numerics, utils
from rkhs_confidence.kernels import KernelSpec
from rkhs_confidence.losses import LossSpec
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    NEWTON_STEP = "Newton iteration {}: objective {}, gradient norm {}, step length {}."
    NEWTON_STALLED = "Line search could not decrease the objective at iteration {}, stopping."
    NEWTON_DONE = "Fit with lambda={} converged after {} iterations (rank {} of {})."
    NO_CONVERGENCE = "Newton method did not converge in {} iterations, gradient norm {}."
    KERNEL_MISMATCH = "expansions over the same kernel, got {} and {}"


class SolverFailureError(ArithmeticError):
    """Newton method stopped after {} iterations with gradient norm {} at objective {}."""

    def __init__(self, iterations: int, gradient_norm: float, objective_value: float):
        self.__iterations = iterations
        self.__gradient_norm = gradient_norm
        self.__objective_value = objective_value
        self.__doc__ = self.__doc__.format(iterations, gradient_norm, objective_value)
        super().__init__(self.__doc__)

    @property
    def iterations(self) -> int:
        return self.__iterations

    @property
    def gradient_norm(self) -> float:
        return self.__gradient_norm

    @property
    def objective_value(self) -> float:
        return self.__objective_value


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

REGRESSION = "regression"
CLASSIFICATION = "classification"

# rough number of kernel entries evaluated at once when a long expansion is evaluated on many points
_CHUNK_ENTRIES = 2_000_000
# beyond this many observations the Gram matrix is never assembled
DENSE_LIMIT = 4000


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Observations ``(x_i, y_i)`` with optional weights of the empirical measure.
    :param xs: ``n x d`` covariates, a flat vector is read as ``n`` one-dimensional points
    :param ys: ``n`` labels, in ``{-1, +1}`` when ``task`` is ``classification``
    :param task: ``regression`` or ``classification``
    :param weights: nonnegative weights, normalised to sum to one; uniform ``1/n`` when omitted
    """
    xs: np.ndarray
    ys: np.ndarray
    task: str = REGRESSION
    weights: typing.Optional[np.ndarray] = None

    def __post_init__(self):
        xs = utils.as_points(self.xs, "xs").copy()
        ys = np.array(self.ys, dtype=float).ravel()
        if xs.shape[0] < 1:
            raise ContractViolationError("at least one observation", xs.shape[0])
        if ys.size != xs.shape[0]:
            raise ContractViolationError(f"{xs.shape[0]} labels", ys.size)
        if not np.all(np.isfinite(ys)):
            raise ContractViolationError("finite labels", ErrorMsg.NOT_FINITE.format("ys"))
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise ContractViolationError("task regression or classification", self.task)
        if self.task == CLASSIFICATION and not np.all(np.abs(ys) == 1.0):
            raise ContractViolationError("classification labels in {-1, +1}", np.unique(ys))
        if self.weights is None:
            weights = np.full(xs.shape[0], 1.0 / xs.shape[0])
        else:
            weights = np.asarray(self.weights, dtype=float).ravel()
            if weights.size != xs.shape[0] or not np.all(np.isfinite(weights)) or np.any(weights < 0) \
                    or not weights.sum() > 0:
                raise ContractViolationError(f"{xs.shape[0]} nonnegative finite weights with positive sum",
                                             self.weights)
            weights = weights / weights.sum()
        xs.setflags(write=False)
        ys.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def subset(self, indices: typing.Sequence[int]) -> Dataset:
        """The observations at ``indices``, their weights renormalised."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.xs[idx], self.ys[idx], self.task, self.weights[idx])

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n}, d={self.dim}, task={self.task})"


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    """
    The RKHS element ``f = sum_i coeffs[i] * k(centers[i], .)``.

    Terms with a zero coefficient are skipped when evaluating, so expansions coming out of a low-rank fit stay cheap
    however many centers they formally carry.
    """
    kernel: KernelSpec
    centers: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        centers = utils.as_points(self.centers, "centers").copy()
        if self.kernel.input_dim > 1 and np.ndim(self.centers) == 1:
            centers = centers.reshape(1, -1)
        coeffs = np.array(self.coeffs, dtype=float).ravel()
        if centers.shape[1] != self.kernel.input_dim:
            raise ContractViolationError(f"centers of dimension {self.kernel.input_dim}",
                                         ErrorMsg.DIMENSION_MISMATCH.format(centers.shape[1], self.kernel.input_dim))
        if coeffs.size != centers.shape[0]:
            raise ContractViolationError(f"{centers.shape[0]} coefficients", coeffs.size)
        if not np.all(np.isfinite(coeffs)):
            raise ContractViolationError("finite coefficients", ErrorMsg.NOT_FINITE.format("coeffs"))
        centers.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coeffs", coeffs)

    @functools.cached_property
    def _active(self) -> typing.Tuple[np.ndarray, np.ndarray]:
        mask = self.coeffs != 0.0
        return self.centers[mask], self.coeffs[mask]

    def evaluate(self, points: typing.Any) -> np.ndarray:
        """Values ``f(x)`` at every row of ``points``."""
        xs = kernels.check_points(self.kernel, points, "points")
        centers, coeffs = self._active
        if coeffs.size == 0:
            return np.zeros(xs.shape[0])
        chunk = max(1, _CHUNK_ENTRIES // coeffs.size)
        return np.concatenate([kernels.cross_gram(self.kernel, xs[start:start + chunk], centers) @ coeffs
                               for start in range(0, xs.shape[0], chunk)])

    def __call__(self, x: typing.Any) -> float:
        return float(self.evaluate(utils.as_point(x, self.kernel.input_dim).reshape(1, -1))[0])

    def gradient(self, x0: typing.Any) -> np.ndarray:
        """Gradient of ``f`` at ``x0``."""
        centers, coeffs = self._active
        if coeffs.size == 0:
            return np.zeros(self.kernel.input_dim)
        return coeffs @ kernels.grad2_matrix(self.kernel, centers, x0)

    def inner(self, other: KernelExpansion) -> float:
        """RKHS inner product ``<self, other>_H`` by double summation over both expansions."""
        self.__same_kernel(other)
        a_centers, a = self._active
        b_centers, b = other._active
        if a.size == 0 or b.size == 0:
            return 0.0
        return float(a @ kernels.cross_gram(self.kernel, a_centers, b_centers) @ b)

    def h_norm_sq(self) -> float:
        return max(self.inner(self), 0.0)

    def combine(self, other: KernelExpansion, alpha: float = 1.0, beta: float = 1.0) -> KernelExpansion:
        """The element ``alpha * self + beta * other``."""
        self.__same_kernel(other)
        return KernelExpansion(self.kernel,
                               np.vstack([self.centers, other.centers]),
                               np.concatenate([alpha * self.coeffs, beta * other.coeffs]))

    def __same_kernel(self, other: KernelExpansion):
        if other.kernel != self.kernel:
            raise ContractViolationError(ErrorMsg.KERNEL_MISMATCH.format(self.kernel, other.kernel), other.kernel)


@dataclass(frozen=True, eq=False)
class Convergence:
    iterations: int
    gradient_norm: float
    objective: float
    rank: int


@dataclass(frozen=True, eq=False)
class FittedModel(KernelExpansion):
    """
    Result of :func:`fit`: the expansion over the training covariates plus everything it was fitted with.
    :param fitted_values: ``f(x_i)`` at the training covariates
    :param norm_sq: ``|f|_H^2`` in the factorised Gram geometry the solver worked in
    """
    loss: LossSpec = field(default_factory=LossSpec)
    lam: float = 1.0
    data: typing.Optional[Dataset] = None
    fitted_values: typing.Optional[np.ndarray] = None
    norm_sq: typing.Optional[float] = None
    diagnostics: typing.Optional[Convergence] = None

    @functools.cached_property
    def gram(self) -> np.ndarray:
        """Gram matrix of the support points, assembled on first access."""
        return kernels.gram(self.kernel, self.centers)

    def h_norm_sq(self) -> float:
        if self.norm_sq is not None:
            return self.norm_sq
        return super().h_norm_sq()

    def __repr__(self):
        return (f"{self.__class__.__name__}("
                f"kernel={self.kernel}, "
                f"loss={self.loss}, "
                f"lambda={self.lam!r}, "
                f"n={self.centers.shape[0]}, "
                f"iterations={self.diagnostics.iterations if self.diagnostics else None})")


def evaluate(model: KernelExpansion, x: typing.Any) -> float:
    """``f(x) = sum_i a_i k(x_i, x)`` at a single point."""
    return model(x)


def h_norm_sq(model: KernelExpansion) -> float:
    """``a^T G a``, the squared RKHS norm."""
    return model.h_norm_sq()


def _check_lambda(lam: float):
    if not lam > 0 or not np.isfinite(lam):
        raise ContractViolationError("lambda > 0", lam)


def objective(data: Dataset, kernel: KernelSpec, loss: LossSpec, lam: float, coeffs: typing.Any) -> float:
    """Regularised empirical risk ``sum_i w_i L(x_i, y_i, (G a)_i) + lambda a^T G a`` of explicit coefficients."""
    _check_lambda(lam)
    a = np.asarray(coeffs, dtype=float).ravel()
    g = kernels.gram(kernel, data.xs)
    t = g @ a
    return float(data.weights @ losses.loss(loss, data.xs, data.ys, t) + lam * max(float(a @ t), 0.0))


def _factorise(data: Dataset, kernel: KernelSpec, tol: typing.Optional[float]):
    diag = kernels.diagonal(kernel, data.xs)
    if tol is None:
        tol = data.n * numerics.EPS * float(np.max(diag))
    if data.n <= DENSE_LIMIT:
        g = kernels.gram(kernel, data.xs)
        return numerics.incomplete_cholesky(diag, lambda j: g[:, j], tol)

    def column(j: int) -> np.ndarray:
        return kernels.cross_gram(kernel, data.xs, data.xs[j:j + 1])[:, 0]

    return numerics.incomplete_cholesky(diag, column, tol)


def fit(data: Dataset,
        kernel: KernelSpec,
        loss: LossSpec,
        lam: float,
        init: typing.Optional[typing.Any] = None,
        tol: float = 1e-9,
        max_iteration: int = 100,
        rank_tol: typing.Optional[float] = None) -> FittedModel:
    """
    Minimise the regularised empirical risk over the span of ``k(x_i, .)``.

    :param init: starting coefficients ``a``, zero when omitted
    :param tol: relative gradient tolerance, the fit stops once ``|grad J| <= tol * max(1, |J|)``
    :param max_iteration: Newton iterations before giving up
    :param rank_tol: absolute threshold of the pivoted Cholesky factor, defaults to ``n * eps * max k(x_i, x_i)``
    :raises ContractViolationError: if ``lam <= 0``, the labels do not fit the loss or the kernel dimension differs
    :raises SolverFailureError: if the Newton method does not converge within ``max_iteration`` iterations
    """
    logger = logging.getLogger(__name__)
    _check_lambda(lam)
    if data.dim != kernel.input_dim:
        raise ContractViolationError(f"data of dimension {kernel.input_dim}",
                                     ErrorMsg.DIMENSION_MISMATCH.format(data.dim, kernel.input_dim))
    losses.check_labels(loss, data.ys)

    pivots, rank, factor = _factorise(data, kernel, rank_tol)
    w = data.weights
    ys = data.ys

    def value(c: np.ndarray) -> float:
        return float(w @ losses.loss(loss, data.xs, ys, factor @ c) + lam * (c @ c))

    c = np.zeros(rank) if init is None else factor.T @ np.asarray(init, dtype=float).ravel()
    j = value(c)
    grad_norm = np.inf
    for iteration in range(1, max_iteration + 1):
        t = factor @ c
        grad = factor.T @ (w * losses.dloss(loss, data.xs, ys, t)) + 2.0 * lam * c
        # report the gradient in coefficient space, F maps the whitened gradient there
        grad_norm = float(np.linalg.norm(factor @ grad))
        if grad_norm <= tol * max(1.0, abs(j)):
            break
        hessian = (factor.T * (w * losses.ddloss(loss, data.xs, ys, t))) @ factor + 2.0 * lam * np.eye(rank)
        direction = np.linalg.solve(hessian, -grad)
        slope = float(grad @ direction)
        step = 1.0
        accepted = False
        for _ in range(60):
            candidate = c + step * direction
            j_candidate = value(candidate)
            if j_candidate <= j + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        step_norm = step * float(np.linalg.norm(direction)) if accepted else 0.0
        logger.debug(ErrorMsg.NEWTON_STEP.format(iteration, j, grad_norm, step_norm))
        if not accepted:
            logger.debug(ErrorMsg.NEWTON_STALLED.format(iteration))
            break
        c, j = candidate, j_candidate
        if step_norm <= 1e-12:
            break
    else:
        logger.error(ErrorMsg.NO_CONVERGENCE.format(max_iteration, grad_norm))
        raise SolverFailureError(max_iteration, grad_norm, j)

    coeffs = np.zeros(data.n)
    if rank:
        # factor[pivots] is lower triangular in pivot order; b solves L_pp^T b = c
        coeffs[pivots] = np.linalg.solve(factor[pivots].T, c)
    logger.debug(ErrorMsg.NEWTON_DONE.format(lam, iteration, rank, data.n))
    return FittedModel(kernel=kernel,
                       centers=data.xs,
                       coeffs=coeffs,
                       loss=loss,
                       lam=lam,
                       data=data,
                       fitted_values=factor @ c,
                       norm_sq=float(c @ c),
                       diagnostics=Convergence(iteration, grad_norm, j, rank))
