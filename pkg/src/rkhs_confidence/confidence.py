"""
Elliptical confidence sets ``{w : n * |Sigma^-1/2 (w - center)|^2 <= q}`` with ``q`` the ``1 - alpha`` quantile of the
chi-squared distribution with ``m`` degrees of freedom.
"""
from __future__ import annotations

import logging
import math
import typing
from dataclasses import dataclass

import numpy as np

from rkhs_confidence import errors, numerics
from rkhs_confidence.covariance import CovarianceEstimate
from rkhs_confidence.numerics import DegenerateCovarianceError, EigenDecomposition
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    DEGENERATE = ("Covariance estimate is singular (smallest eigenvalue {}, trace {}). "
                  "Run the Psi rank test to check whether the functional is visible on the sample.")
    NOT_SCALAR = "an m = 1 ellipsoid"


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

# membership tolerance, points constructed on the boundary must count as inside
BOUNDARY_SLACK = 1e-9
# eigenvalues at or below this fraction of the trace make the estimate singular
DEGENERACY_RATIO = 1e-12


class Axis(typing.NamedTuple):
    length: float
    direction: np.ndarray


@dataclass(frozen=True, eq=False)
class ConfidenceEllipsoid:
    """
    Built by :func:`build_ellipsoid`; the geometry (inverse square root, eigenpairs) is derived, never stored
    in :meth:`to_record`.
    """
    center: np.ndarray
    sigma_hat: np.ndarray
    n: int
    alpha: float
    chi2: float
    inv_sqrt: np.ndarray
    eigen: EigenDecomposition

    @property
    def m(self) -> int:
        return self.center.size

    @property
    def radius_sq(self) -> float:
        """Bound of the quadratic form ``|Sigma^-1/2 (w - center)|^2``."""
        return self.chi2 / self.n

    def mahalanobis(self, w: typing.Any) -> float:
        """``n * |Sigma^-1/2 (w - center)|^2``, compared against :attr:`chi2`."""
        diff = np.atleast_1d(np.asarray(w, dtype=float)).ravel()
        if diff.size != self.m:
            raise ContractViolationError(f"a vector of length {self.m}", diff.size)
        z = self.inv_sqrt @ (diff - self.center)
        return float(self.n * (z @ z))

    def contains(self, w: typing.Any) -> bool:
        return self.mahalanobis(w) <= self.chi2 * (1.0 + BOUNDARY_SLACK)

    def principal_axes(self) -> typing.List[Axis]:
        """Semi-axes ``sqrt(chi2 * gamma_j / n) * v_j`` in order of decreasing length."""
        return [Axis(math.sqrt(self.chi2 * max(float(gamma), 0.0) / self.n), self.eigen.eigenvectors[:, j].copy())
                for j, gamma in enumerate(self.eigen.eigenvalues)]

    def interval(self) -> typing.Tuple[float, float]:
        """``center -/+ sqrt(chi2 * Sigma / n)`` of a one-dimensional set."""
        if self.m != 1:
            raise ContractViolationError(ErrorMsg.NOT_SCALAR, f"m = {self.m}")
        half = math.sqrt(self.chi2 * float(self.sigma_hat[0, 0]) / self.n)
        return float(self.center[0]) - half, float(self.center[0]) + half

    @property
    def length(self) -> float:
        lo, hi = self.interval()
        return hi - lo

    def volume(self) -> float:
        """Lebesgue volume, unit ball volume times the product of semi-axes."""
        unit_ball = math.pi ** (self.m / 2.0) / math.gamma(self.m / 2.0 + 1.0)
        return unit_ball * float(np.prod([axis.length for axis in self.principal_axes()]))

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {"center": self.center.copy(), "sigma_hat": self.sigma_hat.copy(), "n": self.n, "alpha": self.alpha}


def build_ellipsoid(center: typing.Any,
                    cov: typing.Union[CovarianceEstimate, typing.Any],
                    n: int,
                    alpha: float) -> ConfidenceEllipsoid:
    """
    :param center: ``psi`` of the fitted model
    :param cov: the covariance estimate or a bare ``m x m`` matrix
    :param n: sample size
    :param alpha: level, the set has asymptotic coverage ``1 - alpha``
    :raises DegenerateCovarianceError: if the estimate is singular relative to its trace
    :raises ContractViolationError: on shape mismatches, ``n < 1`` or ``alpha`` outside ``(0, 1)``
    """
    sigma = cov.sigma_hat if isinstance(cov, CovarianceEstimate) else np.atleast_2d(np.asarray(cov, dtype=float))
    c = np.atleast_1d(np.asarray(center, dtype=float)).ravel().copy()
    if sigma.shape != (c.size, c.size):
        raise ContractViolationError(f"a {c.size}x{c.size} covariance", sigma.shape)
    if int(n) != n or n < 1:
        raise ContractViolationError("n >= 1", n)
    eigen = numerics.sym_eig(sigma)
    trace = float(np.trace(sigma))
    smallest = float(eigen.eigenvalues[-1])
    if not smallest > DEGENERACY_RATIO * max(trace, 0.0) or not smallest > 0:
        logging.getLogger(__name__).error(ErrorMsg.DEGENERATE.format(smallest, trace))
        raise DegenerateCovarianceError(smallest)
    inv_sqrt = numerics.spd_inv_sqrt(sigma, floor=DEGENERACY_RATIO * trace)
    chi2 = numerics.chi2_quantile(c.size, alpha)
    return ConfidenceEllipsoid(c, sigma.copy(), int(n), float(alpha), chi2, inv_sqrt, eigen)


def from_record(record: typing.Mapping[str, typing.Any]) -> ConfidenceEllipsoid:
    """Rebuild an ellipsoid from :meth:`ConfidenceEllipsoid.to_record` output."""
    return build_ellipsoid(record["center"], record["sigma_hat"], record["n"], record["alpha"])


def contains(e: ConfidenceEllipsoid, w: typing.Any) -> bool:
    return e.contains(w)


def mahalanobis(e: ConfidenceEllipsoid, w: typing.Any) -> float:
    return e.mahalanobis(w)


def principal_axes(e: ConfidenceEllipsoid) -> typing.List[Axis]:
    return e.principal_axes()


def interval(e: ConfidenceEllipsoid) -> typing.Tuple[float, float]:
    return e.interval()


def volume(e: ConfidenceEllipsoid) -> float:
    return e.volume()


def to_record(e: ConfidenceEllipsoid) -> typing.Dict[str, typing.Any]:
    return e.to_record()
