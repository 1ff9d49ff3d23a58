"""
Plug-in estimate of the asymptotic covariance of ``sqrt(n) * (psi(f_D) - psi(f_P))``.

For a fitted model the linear operator ``K(h) = 2 lambda h + sum_i w_i L''_i h(x_i) k(x_i, .)`` is inverted on kernel
sections in closed form::

    K^-1 k(x, .) = k(x, .) / (2 lambda) + sum_i alpha_i(x) k(x_i, .)
    alpha(x)     = -1 / (2 lambda) * (B A)^- B (w * L'' * k(X, x))
    A            = 2 lambda I + diag(w * L'') G

``B`` expresses every feature vector through a maximal linearly independent subset of them. One pseudoinverse of
``B A`` serves every point, after which ``g(x, y) = -L'(y, f(x)) * psi'(K^-1 k(x, .))`` and the weighted covariance
of the centered ``g`` values cost only matrix products.
"""
from __future__ import annotations

import logging
import typing
from dataclasses import dataclass

import numpy as np

from rkhs_confidence import errors, kernels, losses, numerics, utils
from rkhs_confidence.functionals import Functional
from rkhs_confidence.kernels import KernelSpec
from rkhs_confidence.solver import Dataset, FittedModel, KernelExpansion
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    BASIS_FOUND = "Feature basis of {} out of {} points ({})."
    MACHINERY_READY = "Pseudoinverse of the {}x{} system computed."
    SIGMA_DONE = "Covariance estimate for {} computed from {} observations."
    MODEL_DATA_MISMATCH = "a model fitted on the given data"


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""


@dataclass(frozen=True, eq=False)
class BasisDecomposition:
    """
    :param basis_indices: indices ``i_1, ..., i_r`` of linearly independent feature vectors
    :param b: ``r x n`` coefficients with ``k(x_i, .) = sum_j b[j, i] k(x_{i_j}, .)``
    """
    basis_indices: np.ndarray
    b: np.ndarray

    @property
    def rank(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """
    :param sigma_hat: symmetric ``m x m`` estimate
    :param n: number of observations it is computed from
    :param lam: regularisation parameter of the model
    :param g_values: ``n x m`` values ``g(x_i, y_i)``
    :param functional: description of the functional
    """
    sigma_hat: np.ndarray
    n: int
    lam: float
    g_values: np.ndarray
    functional: str = ""

    @property
    def m(self) -> int:
        return self.sigma_hat.shape[0]


def _rbf_ties(xs: np.ndarray) -> BasisDecomposition:
    first_seen: typing.Dict[bytes, int] = {}
    owner = np.empty(xs.shape[0], dtype=int)
    basis = []
    for i, row in enumerate(xs):
        # -0.0 and 0.0 are the same covariate
        key = (row + 0.0).tobytes()
        if key not in first_seen:
            first_seen[key] = len(basis)
            basis.append(i)
        owner[i] = first_seen[key]
    b = np.zeros((len(basis), xs.shape[0]))
    b[owner, np.arange(xs.shape[0])] = 1.0
    return BasisDecomposition(np.asarray(basis, dtype=int), b)


def basis_decomposition(data: Dataset, kernel: KernelSpec, tol: typing.Optional[float] = None) -> BasisDecomposition:
    """
    Pick a maximal set of linearly independent feature vectors among ``k(x_i, .)`` and express all others through it.

    Radial kernels on distinct points have linearly independent features, so only exact ties are merged and ``B`` is
    the identity when there are none. Other kernels go through a pivoted Cholesky factorisation of the Gram matrix.
    :param tol: absolute pivot threshold, defaults to ``1e-10 * max k(x_i, x_i)``
    """
    logger = logging.getLogger(__name__)
    if kernel.is_radial and tol is None:
        decomposition = _rbf_ties(data.xs)
        logger.debug(ErrorMsg.BASIS_FOUND.format(decomposition.rank, data.n, "exact ties"))
        return decomposition
    g = kernels.gram(kernel, data.xs)
    if tol is None:
        tol = 1e-10 * float(np.max(np.diag(g)))
    pivots, rank, _ = numerics.pivoted_cholesky(g, tol)
    if rank == 0:
        # every feature vector vanishes; a single zero-coefficient basis element keeps B A well formed
        return BasisDecomposition(np.array([0]), np.zeros((1, data.n)))
    idx = np.asarray(pivots, dtype=int)
    b = np.linalg.solve(g[np.ix_(idx, idx)], g[idx, :])
    b[:, idx] = np.eye(rank)
    logger.debug(ErrorMsg.BASIS_FOUND.format(rank, data.n, "pivoted Cholesky"))
    return BasisDecomposition(idx, b)


def _weights_and_derivatives(data: Dataset, model: FittedModel) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if model.data is not None and model.data is not data and model.data.n != data.n:
        raise ContractViolationError(ErrorMsg.MODEL_DATA_MISMATCH, model)
    fitted = model.fitted_values if model.fitted_values is not None and model.data is data \
        else model.evaluate(data.xs)
    return (fitted,
            np.asarray(losses.dloss(model.loss, data.xs, data.ys, fitted), dtype=float),
            np.asarray(losses.ddloss(model.loss, data.xs, data.ys, fitted), dtype=float))


def build_A(data: Dataset, model: FittedModel) -> np.ndarray:
    """``A = 2 lambda I + diag(w * L''(x_i, y_i, f(x_i))) G``."""
    _, _, curvature = _weights_and_derivatives(data, model)
    g = model.gram if model.data is data else kernels.gram(model.kernel, data.xs)
    return 2.0 * model.lam * np.eye(data.n) + (data.weights * curvature)[:, np.newaxis] * g


class CovarianceMachinery:
    """
    Everything about a fitted model that the ``g`` values share: fitted values, loss derivatives, ``B`` and the
    pseudoinverse of ``B A``. Built once per model, then queried for any number of points.
    """

    def __init__(self, data: Dataset, model: FittedModel, basis: typing.Optional[BasisDecomposition] = None,
                 rtol: typing.Optional[float] = None):
        self.__logger = logging.getLogger(self.__class__.__name__)
        self.__data = data
        self.__model = model
        self.__basis = basis if basis is not None else basis_decomposition(data, model.kernel)
        self.__fitted, self.__slope, self.__curvature = _weights_and_derivatives(data, model)
        self.__scaled_curvature = data.weights * self.__curvature
        a = build_A(data, model)
        self.__pinv = numerics.pinv(self.__basis.b @ a, rtol)
        # psi'(f) at the training covariates, per functional
        self.__psi_at_sample: typing.Dict[Functional, np.ndarray] = {}
        self.__logger.debug(ErrorMsg.MACHINERY_READY.format(self.__basis.rank, data.n))

    @property
    def basis(self) -> BasisDecomposition:
        return self.__basis

    @property
    def model(self) -> FittedModel:
        return self.__model

    def psi_at_sample(self, fun: Functional) -> np.ndarray:
        """``n x m`` matrix of ``psi'(f)`` at the training covariates."""
        if fun not in self.__psi_at_sample:
            psi = np.asarray(fun.prime(self.__model, self.__data.xs), dtype=float)
            psi.setflags(write=False)
            self.__psi_at_sample[fun] = psi
        return self.__psi_at_sample[fun]

    def alpha(self, points: typing.Any) -> np.ndarray:
        """``n x q`` matrix whose column ``j`` holds ``alpha(x_j)`` for the ``q`` rows of ``points``."""
        k = kernels.cross_gram(self.__model.kernel, self.__data.xs, points)
        rhs = self.__basis.b @ (self.__scaled_curvature[:, np.newaxis] * k)
        return -(self.__pinv @ rhs) / (2.0 * self.__model.lam)

    def inverse_section(self, x: typing.Any) -> KernelExpansion:
        """``K^-1 k(x, .)`` as an expansion over ``x`` and the training covariates."""
        point = utils.as_point(x, self.__model.kernel.input_dim).reshape(1, -1)
        alpha = self.alpha(point)[:, 0]
        return KernelExpansion(self.__model.kernel,
                               np.vstack([point, self.__data.xs]),
                               np.concatenate([[1.0 / (2.0 * self.__model.lam)], alpha]))

    def g_values(self, fun: Functional, points: typing.Any, labels: typing.Any) -> np.ndarray:
        """``q x m`` matrix of ``g(x_j, y_j)``."""
        xs = kernels.check_points(self.__model.kernel, points, "points")
        ys = np.atleast_1d(np.asarray(labels, dtype=float)).ravel()
        if ys.size != xs.shape[0]:
            raise ContractViolationError(f"{xs.shape[0]} labels", ys.size)
        slope = np.asarray(losses.dloss(self.__model.loss, xs, ys, self.__model.evaluate(xs)), dtype=float)
        return self.__g(fun, xs, slope)

    def __g(self, fun: Functional, xs: np.ndarray, slope: np.ndarray) -> np.ndarray:
        psi_at_points = fun.prime(self.__model, xs)
        psi_at_sample = self.psi_at_sample(fun)
        expansion = psi_at_points / (2.0 * self.__model.lam) + self.alpha(xs).T @ psi_at_sample
        return -slope[:, np.newaxis] * expansion

    def sigma_hat(self, fun: Functional) -> CovarianceEstimate:
        """Weighted covariance of the centered ``g(x_i, y_i)`` over the training sample."""
        g = self.__g(fun, self.__data.xs, self.__slope)
        w = self.__data.weights
        centered = g - w @ g
        sigma = (centered * w[:, np.newaxis]).T @ centered
        self.__logger.debug(ErrorMsg.SIGMA_DONE.format(fun, self.__data.n))
        return CovarianceEstimate(0.5 * (sigma + sigma.T), self.__data.n, self.__model.lam, g, str(fun))


def alpha_coefficients(data: Dataset, model: FittedModel, basis: BasisDecomposition, x: typing.Any,
                       y_ignored: typing.Any = None) -> np.ndarray:
    """``alpha(x)``, the coefficients of ``K^-1 k(x, .)`` on the training sections."""
    point = utils.as_point(x, model.kernel.input_dim).reshape(1, -1)
    return CovarianceMachinery(data, model, basis).alpha(point)[:, 0]


def g_value(data: Dataset, model: FittedModel, basis: BasisDecomposition, fun: Functional, x: typing.Any,
            y: float) -> np.ndarray:
    point = utils.as_point(x, model.kernel.input_dim).reshape(1, -1)
    return CovarianceMachinery(data, model, basis).g_values(fun, point, [y])[0]


def sigma_hat(data: Dataset, model: FittedModel, basis: typing.Optional[BasisDecomposition],
              fun: Functional) -> CovarianceEstimate:
    return CovarianceMachinery(data, model, basis).sigma_hat(fun)


def dense_operator_inverse(data: Dataset, model: FittedModel, x: typing.Any) -> KernelExpansion:
    """
    Solve ``K(h) = k(x, .)`` by brute force on the spanning set ``S = (x, x_1, ..., x_n)``.

    On coefficient vectors over ``S`` the operator acts as ``M = 2 lambda I + [0; diag(w * L'') G_{X,S}]``; matching
    coefficients gives ``M c = e_0``, a solution of the Gram system ``G_S M c = G_S e_0`` whose solutions all
    represent the same function. Independent of the basis and pseudoinverse shortcut, so it checks it.
    """
    point = utils.as_point(x, model.kernel.input_dim).reshape(1, -1)
    spanning = np.vstack([point, data.xs])
    _, _, curvature = _weights_and_derivatives(data, model)
    m = 2.0 * model.lam * np.eye(data.n + 1)
    m[1:, :] += (data.weights * curvature)[:, np.newaxis] * kernels.cross_gram(model.kernel, data.xs, spanning)
    e0 = np.zeros(data.n + 1)
    e0[0] = 1.0
    return KernelExpansion(model.kernel, spanning, np.linalg.solve(m, e0))
