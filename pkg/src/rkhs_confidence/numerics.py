"""
Dense linear algebra and the chi-squared quantile shared by every statistical module.

All routines take and return ``numpy`` arrays, keep no state and are safe to call from several threads at once.
"""
from __future__ import annotations

import logging
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
    ASYMMETRIC = "relative asymmetry {} exceeds {}"
    NEGATIVE_DIAGONAL = "diagonal entry {} at index {} is below -tol"
    NOT_SQUARE = "a {}x{} matrix"
    CHI2_NO_CONVERGENCE = "Chi-squared quantile did not converge for m={}, alpha={} after {} iterations."


class NumericFailureError(ArithmeticError):
    """The numerical routine {} failed after {} iterations."""

    def __init__(self, operation: str, iterations: typing.Optional[int]):
        self.__operation = operation
        self.__iterations = iterations
        self.__doc__ = self.__doc__.format(operation, "an unreported number of" if iterations is None else iterations)
        super().__init__(self.__doc__)

    @property
    def operation(self) -> str:
        return self.__operation

    @property
    def iterations(self) -> typing.Optional[int]:
        return self.__iterations


class DegenerateCovarianceError(ArithmeticError):
    """The matrix is not positive definite: smallest eigenvalue is {}. Check the Psi rank test of the functional."""

    def __init__(self, smallest_eigenvalue: float):
        self.__smallest_eigenvalue = smallest_eigenvalue
        self.__doc__ = self.__doc__.format(smallest_eigenvalue)
        super().__init__(self.__doc__)

    @property
    def smallest_eigenvalue(self) -> float:
        return self.__smallest_eigenvalue


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

EPS = np.finfo(float).eps
# initial number of columns of an incomplete Cholesky factor, doubled whenever it fills up
_FACTOR_BLOCK = 64


@dataclass(frozen=True)
class EigenDecomposition:
    """
    :param eigenvalues: real eigenvalues sorted in descending order
    :param eigenvectors: orthonormal eigenvectors as columns, ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_matrix(m: typing.Any) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or 0 in arr.shape:
        raise ContractViolationError("a non-empty 2-D matrix", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("a finite matrix", ErrorMsg.NOT_FINITE.format("matrix"))
    return arr


def _square(m: typing.Any) -> np.ndarray:
    arr = _as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise ContractViolationError("a square matrix", ErrorMsg.NOT_SQUARE.format(*arr.shape))
    return arr


def _svd(m: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as err:
        # LAPACK does not hand the sweep count back to numpy
        raise NumericFailureError("SVD", None) from err


def _cutoff(singular_values: np.ndarray, shape: typing.Tuple[int, int], rtol: typing.Optional[float]) -> float:
    if rtol is None:
        rtol = EPS * max(shape)
    if rtol < 0:
        raise ContractViolationError("rtol >= 0", rtol)
    return rtol * (singular_values[0] if singular_values.size else 0.0)


def pinv(m: typing.Any, rtol: typing.Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse through a thin SVD.
    Singular values at or below ``rtol`` times the largest one are treated as zero.
    :param rtol: relative cutoff, defaults to machine epsilon times the larger dimension
    :raises NumericFailureError: if the SVD does not converge
    """
    arr = _as_matrix(m)
    u, s, vt = _svd(arr)
    cutoff = _cutoff(s, arr.shape, rtol)
    keep = s > cutoff
    if not np.any(keep):
        return np.zeros(arr.T.shape)
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def matrix_rank(m: typing.Any, rtol: typing.Optional[float] = None) -> int:
    """Numerical rank with the same cutoff :func:`pinv` uses."""
    arr = _as_matrix(m)
    s = _svd(arr)[1]
    return int(np.sum(s > _cutoff(s, arr.shape, rtol)))


def sym_eig(m: typing.Any) -> EigenDecomposition:
    """
    Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
    :raises ContractViolationError: if the relative asymmetry exceeds 1e-12
    """
    arr = _square(m)
    scale = max(1.0, float(np.linalg.norm(arr)))
    asymmetry = float(np.linalg.norm(arr - arr.T)) / scale
    if asymmetry > 1e-12:
        raise ContractViolationError("a symmetric matrix", ErrorMsg.ASYMMETRIC.format(asymmetry, 1e-12))
    try:
        values, vectors = np.linalg.eigh(0.5 * (arr + arr.T))
    except np.linalg.LinAlgError as err:
        raise NumericFailureError("symmetric eigendecomposition", None) from err
    order = np.argsort(values)[::-1]
    return EigenDecomposition(values[order], vectors[:, order])


def incomplete_cholesky(diagonal: np.ndarray,
                        column: typing.Callable[[int], np.ndarray],
                        tol: float,
                        max_rank: typing.Optional[int] = None) -> typing.Tuple[typing.List[int], int, np.ndarray]:
    """
    Pivoted Cholesky factorisation that only ever asks for the columns it pivots on.

    Each step picks the largest remaining Schur-complement diagonal entry. The factorisation stops once that entry
    is at or below ``tol`` or ``max_rank`` pivots have been taken.

    :param diagonal: diagonal of the symmetric positive semi-definite matrix ``G``
    :param column: callback returning column ``j`` of ``G``
    :param tol: absolute threshold for the remaining diagonal
    :param max_rank: optional upper bound for the number of pivots
    :raises ContractViolationError: if a diagonal entry is below ``-tol``
    :returns: ``(pivots, rank, factor)`` where ``factor`` is ``n x rank`` and ``factor @ factor.T`` reproduces ``G``
              on the pivot rows and columns exactly and everywhere else up to the remaining diagonal
    """
    residual = np.array(diagonal, dtype=float, copy=True)
    n = residual.size
    negative = np.flatnonzero(residual < -tol)
    if negative.size:
        j = int(negative[0])
        raise ContractViolationError("a positive semi-definite matrix",
                                     ErrorMsg.NEGATIVE_DIAGONAL.format(residual[j], j))
    limit = n if max_rank is None else min(n, max_rank)
    # columns are added in blocks, so memory follows the rank rather than n
    factor = np.zeros((n, min(limit, _FACTOR_BLOCK)))
    pivots: typing.List[int] = []
    for step in range(limit):
        j = int(np.argmax(residual))
        if residual[j] <= tol:
            break
        if step == factor.shape[1]:
            factor = np.hstack([factor, np.zeros((n, min(limit - step, factor.shape[1])))])
        pivot_value = math.sqrt(residual[j])
        col = np.asarray(column(j), dtype=float) - factor[:, :step] @ factor[j, :step]
        col /= pivot_value
        # the pivot entries are exact by construction, stray roundoff would make them re-eligible
        col[pivots] = 0.0
        col[j] = pivot_value
        factor[:, step] = col
        residual -= col ** 2
        residual[pivots] = 0.0
        residual[j] = 0.0
        pivots.append(j)
    rank = len(pivots)
    logging.getLogger(__name__).debug(f"Pivoted Cholesky stopped at rank {rank} of {n}.")
    return pivots, rank, np.ascontiguousarray(factor[:, :rank])


def pivoted_cholesky(g: typing.Any,
                     tol: typing.Optional[float] = None) -> typing.Tuple[typing.List[int], int, np.ndarray]:
    """
    Rank-revealing pivoted Cholesky factorisation of a dense Gram matrix.
    :param tol: absolute threshold for the remaining diagonal, defaults to ``n * eps * max(diag(G))``
    :returns: ``(pivot_indices, rank, factor)``, see :func:`incomplete_cholesky`
    """
    arr = _square(g)
    diagonal = np.diag(arr).copy()
    if tol is None:
        tol = arr.shape[0] * EPS * max(float(np.max(diagonal)), 0.0)
    return incomplete_cholesky(diagonal, lambda j: arr[:, j], tol)


def spd_inv_sqrt(m: typing.Any, floor: float = 0.0) -> np.ndarray:
    """
    Symmetric inverse square root ``R`` with ``R M R = I``, computed spectrally.
    :param floor: eigenvalues at or below this value count as degenerate
    :raises DegenerateCovarianceError: if the smallest eigenvalue is at or below ``floor`` (or not positive)
    """
    decomposition = sym_eig(m)
    smallest = float(decomposition.eigenvalues[-1])
    if smallest <= max(floor, 0.0):
        raise DegenerateCovarianceError(smallest)
    v = decomposition.eigenvectors
    r = (v / np.sqrt(decomposition.eigenvalues)) @ v.T
    return 0.5 * (r + r.T)


"""---------------------------------------------------------------------------------------------------------------------
CHI-SQUARED
---------------------------------------------------------------------------------------------------------------------"""


def _gamma_series(a: float, x: float, max_iteration: int = 500) -> float:
    # lower regularised gamma by its power series, good for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(max_iteration):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float, max_iteration: int = 500) -> float:
    # upper regularised gamma by the modified Lentz continued fraction, good for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, max_iteration + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularised incomplete gamma function ``P(a, x)``."""
    if a <= 0:
        raise ContractViolationError("a > 0", a)
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_continued_fraction(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularised incomplete gamma function ``Q(a, x) = 1 - P(a, x)`` without cancellation."""
    if a <= 0:
        raise ContractViolationError("a > 0", a)
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_continued_fraction(a, x)


def chi2_cdf(q: float, m: int) -> float:
    return regularized_gamma_p(0.5 * m, 0.5 * q)


def _chi2_sf(q: float, m: int) -> float:
    return regularized_gamma_q(0.5 * m, 0.5 * q)


def _chi2_pdf(q: float, m: int) -> float:
    if q <= 0:
        return 0.0
    half = 0.5 * m
    return math.exp((half - 1.0) * math.log(q) - 0.5 * q - half * math.log(2.0) - math.lgamma(half))


def normal_quantile(p: float) -> float:
    """
    Standard normal quantile from the Abramowitz & Stegun rational approximation (absolute error below 3e-3).
    Only meant as a starting point for Newton iterations.
    """
    if not 0.0 < p < 1.0:
        raise ContractViolationError("0 < p < 1", p)
    upper = p > 0.5
    tail = 1.0 - p if upper else p
    t = math.sqrt(-2.0 * math.log(tail))
    z = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t ** 2)
    return z if upper else -z


def chi2_quantile(m: int, alpha: float, max_iteration: int = 100) -> float:
    """
    The ``1 - alpha`` quantile of the chi-squared distribution with ``m`` degrees of freedom.

    Safeguarded Newton iteration on the regularised incomplete gamma function, started at the
    Wilson-Hilferty approximation. Whichever tail is smaller is matched, so tiny ``alpha`` stays accurate.
    :raises ContractViolationError: if ``m < 1`` or ``alpha`` is outside ``(0, 1)``
    :raises NumericFailureError: if the iteration does not settle within ``max_iteration`` steps
    """
    if int(m) != m or m < 1:
        raise ContractViolationError("m >= 1 degrees of freedom", m)
    if not 0.0 < alpha < 1.0:
        raise ContractViolationError("0 < alpha < 1", alpha)
    m = int(m)

    if alpha <= 0.5:
        def residual(q: float) -> float:
            return alpha - _chi2_sf(q, m)
    else:
        def residual(q: float) -> float:
            return chi2_cdf(q, m) - (1.0 - alpha)

    # residual is increasing in q, keep a bracket [lo, hi] around its root
    z = normal_quantile(1.0 - alpha)
    c = 2.0 / (9.0 * m)
    q = m * max(1.0 - c + z * math.sqrt(c), 1e-3) ** 3
    lo, hi = 0.0, max(2.0 * q, 1.0)
    while residual(hi) < 0:
        lo, hi = hi, 2.0 * hi

    for iteration in range(1, max_iteration + 1):
        r = residual(q)
        if r == 0.0:
            return q
        if r < 0:
            lo = max(lo, q)
        else:
            hi = min(hi, q)
        pdf = _chi2_pdf(q, m)
        candidate = q - r / pdf if pdf > 0 else math.nan
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - q) <= 1e-15 * max(1.0, q) or hi - lo <= 1e-15 * max(1.0, hi):
            return candidate
        q = candidate
    logging.getLogger(__name__).error(ErrorMsg.CHI2_NO_CONVERGENCE.format(m, alpha, max_iteration))
    raise NumericFailureError("chi-squared quantile", max_iteration)
