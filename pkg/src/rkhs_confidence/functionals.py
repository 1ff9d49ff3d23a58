"""
Finite-dimensional functionals ``psi: H -> R^m`` of a fitted model together with their derivative.

The covariance estimator needs the derivative ``psi'`` only through its values at points of the input space, so every
:class:`Functional` exposes two things: :meth:`Functional.value` at a model and :meth:`Functional.prime`, the ``m``
derivative functions evaluated at a batch of points. Nonlinear functionals evaluate the derivative at the model they
are given, which is the plug-in the covariance estimate relies on.

Supported kinds::

    pointwise        f(x~_1), ..., f(x~_m)
    inner-products   <f, h_1>_H, ..., <f, h_m>_H
    gradient         grad f(x0)
    integral         integral of f over a box, against the empirical covariates or Lebesgue measure
    squared-h-norm   |f|_H^2
    squared-l2-norm  integral of f^2 over a box
"""
from __future__ import annotations

import abc
import logging
import re
import typing
from dataclasses import dataclass

import numpy as np

from rkhs_confidence import errors, kernels, numerics, utils
from rkhs_confidence.solver import KernelExpansion, FittedModel
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    RANK_DEFICIENT = "Psi has numerical rank {} < m = {}; the covariance estimate will be singular."
    FEWER_POINTS_THAN_M = "Rank test on {} sample points for an m = {} functional cannot succeed."
    NO_SAMPLE = "The empirical integral needs the covariates of the fitted model or an explicit sample."
    UNKNOWN_KIND = "Functional kind {} is not one of: {}."
    MISSING_KEY = "Functional kind {} requires the key {}."
    UNPARSABLE = "Cannot read {} from {}."
    TOO_MANY_NODES = "Quadrature grid of {} nodes in {} dimensions, consider lowering nodes."


class DomainWarningError(ContractViolationError):
    """Point {} is not an interior point of the input domain {}."""

    def __init__(self, point, domain):
        super().__init__(point, domain)


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

POINTWISE = "pointwise"
INNER_PRODUCTS = "inner-products"
GRADIENT = "gradient"
INTEGRAL = "integral"
SQUARED_H_NORM = "squared-h-norm"
SQUARED_L2_NORM = "squared-l2-norm"
KINDS = (POINTWISE, INNER_PRODUCTS, GRADIENT, INTEGRAL, SQUARED_H_NORM, SQUARED_L2_NORM)

EMPIRICAL = "empirical"
LEBESGUE = "lebesgue"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower_1, upper_1] x ... x [lower_d, upper_d]``."""
    lower: typing.Tuple[float, ...]
    upper: typing.Tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not all(lo < hi for lo, hi in zip(lower, upper)):
            raise ContractViolationError("lower < upper on every axis", (lower, upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def interior(self, point: np.ndarray) -> bool:
        return bool(np.all((point > self.lower) & (point < self.upper)))

    def midpoint_grid(self, nodes: int) -> typing.Tuple[np.ndarray, np.ndarray]:
        """Tensor midpoint rule with ``nodes`` cells per axis: ``(points, weights)``."""
        axes = [lo + (np.arange(nodes) + 0.5) * (hi - lo) / nodes for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.column_stack([axis.ravel() for axis in mesh])
        return points, np.full(points.shape[0], self.volume / nodes ** self.dim)

    def __str__(self):
        return ", ".join(f"{lo!r}:{hi!r}" for lo, hi in zip(self.lower, self.upper))


class Functional(abc.ABC):
    """A functional ``psi`` with output dimension :attr:`m`."""
    kind: str = ""
    is_linear: bool = True

    @property
    @abc.abstractmethod
    def m(self) -> int:
        pass

    @abc.abstractmethod
    def value(self, model: KernelExpansion) -> np.ndarray:
        """``psi(f)`` as a vector of length ``m``."""

    @abc.abstractmethod
    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        """``psi'`` at every row of ``points``, ``len(points) x m``. ``model`` only matters for nonlinear kinds."""

    @abc.abstractmethod
    def as_section(self) -> typing.Dict[str, str]:
        """Key-value form read back by :func:`parse_functional`."""

    def __str__(self):
        return f"{self.kind}(m={self.m})"


class Pointwise(Functional):
    kind = POINTWISE

    def __init__(self, points: typing.Any):
        self.__points = utils.as_points(points, "points")

    @property
    def points(self) -> np.ndarray:
        return self.__points

    @property
    def m(self) -> int:
        return self.__points.shape[0]

    def value(self, model: KernelExpansion) -> np.ndarray:
        return model.evaluate(self.__points)

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        return kernels.cross_gram(model.kernel, points, self.__points)

    def as_section(self) -> typing.Dict[str, str]:
        return {"kind": self.kind, "points": _format_points(self.__points)}


class InnerProducts(Functional):
    kind = INNER_PRODUCTS

    def __init__(self, elements: typing.Sequence[KernelExpansion]):
        if not elements:
            raise ContractViolationError("at least one element h", 0)
        self.__elements = tuple(elements)

    @property
    def elements(self) -> typing.Tuple[KernelExpansion, ...]:
        return self.__elements

    @property
    def m(self) -> int:
        return len(self.__elements)

    def value(self, model: KernelExpansion) -> np.ndarray:
        return np.array([model.inner(h) for h in self.__elements])

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        return np.column_stack([h.evaluate(points) for h in self.__elements])

    def as_section(self) -> typing.Dict[str, str]:
        section = {"kind": self.kind}
        for j, h in enumerate(self.__elements, start=1):
            section[f"h{j}_points"] = _format_points(h.centers)
            section[f"h{j}_coeffs"] = ", ".join(repr(float(c)) for c in h.coeffs)
        return section


class GradientAt(Functional):
    kind = GRADIENT

    def __init__(self, x0: typing.Any, domain: typing.Optional[Box] = None):
        self.__x0 = np.atleast_1d(np.asarray(x0, dtype=float)).ravel()
        self.__domain = domain
        if domain is not None:
            if domain.dim != self.__x0.size:
                raise ContractViolationError(f"a domain of dimension {self.__x0.size}", domain.dim)
            if not domain.interior(self.__x0):
                raise DomainWarningError(tuple(self.__x0), str(domain))

    @property
    def x0(self) -> np.ndarray:
        return self.__x0

    @property
    def m(self) -> int:
        return self.__x0.size

    def value(self, model: KernelExpansion) -> np.ndarray:
        return model.gradient(self.__x0)

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        return kernels.grad2_matrix(model.kernel, points, self.__x0)

    def as_section(self) -> typing.Dict[str, str]:
        section = {"kind": self.kind, "x0": ", ".join(repr(float(v)) for v in self.__x0)}
        if self.__domain is not None:
            section["domain"] = str(self.__domain)
        return section


class IntegralOver(Functional):
    """
    ``int_B f dmu`` with ``mu`` either the empirical distribution of covariates or Lebesgue measure.
    The empirical variant uses ``sample`` when given and the training covariates of the model otherwise.
    """
    kind = INTEGRAL

    def __init__(self, region: Box, measure: str = EMPIRICAL, nodes: int = 201,
                 sample: typing.Optional[typing.Any] = None):
        if measure not in (EMPIRICAL, LEBESGUE):
            raise ContractViolationError(f"measure {EMPIRICAL} or {LEBESGUE}", measure)
        self.__region = region
        self.__measure = measure
        self.__nodes = _check_nodes(nodes, region)
        self.__sample = None if sample is None else utils.as_points(sample, "sample")

    @property
    def m(self) -> int:
        return 1

    def __quadrature(self, model: KernelExpansion) -> KernelExpansion:
        # the measure restricted to B as an expansion: its evaluation at x is int_B k(x, t) dmu(t)
        if self.__measure == LEBESGUE:
            points, weights = self.__region.midpoint_grid(self.__nodes)
            return KernelExpansion(model.kernel, points, weights)
        if self.__sample is not None:
            sample = self.__sample
            weights = np.full(sample.shape[0], 1.0 / sample.shape[0])
        elif isinstance(model, FittedModel) and model.data is not None:
            sample, weights = model.data.xs, model.data.weights
        else:
            raise ContractViolationError("a fitted model or a sample", ErrorMsg.NO_SAMPLE)
        inside = self.__region.contains(sample)
        return KernelExpansion(model.kernel, sample, np.where(inside, weights, 0.0))

    def value(self, model: KernelExpansion) -> np.ndarray:
        quadrature = self.__quadrature(model)
        return np.array([quadrature.coeffs @ model.evaluate(quadrature.centers)])

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        return self.__quadrature(model).evaluate(points)[:, np.newaxis]

    def as_section(self) -> typing.Dict[str, str]:
        return {"kind": self.kind, "region": str(self.__region), "measure": self.__measure,
                "nodes": str(self.__nodes)}


class SquaredHNorm(Functional):
    kind = SQUARED_H_NORM
    is_linear = False

    @property
    def m(self) -> int:
        return 1

    def value(self, model: KernelExpansion) -> np.ndarray:
        return np.array([model.h_norm_sq()])

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        return 2.0 * model.evaluate(points)[:, np.newaxis]

    def as_section(self) -> typing.Dict[str, str]:
        return {"kind": self.kind}


class SquaredL2Norm(Functional):
    """``int_B f^2 dlambda`` on a midpoint grid; the derivative is ``x -> int_B 2 f(t) k(x, t) dt`` on the same grid."""
    kind = SQUARED_L2_NORM
    is_linear = False

    def __init__(self, region: Box, nodes: int = 201):
        self.__region = region
        self.__nodes = _check_nodes(nodes, region)
        self.__grid = region.midpoint_grid(self.__nodes)

    @property
    def m(self) -> int:
        return 1

    def value(self, model: KernelExpansion) -> np.ndarray:
        points, weights = self.__grid
        return np.array([weights @ model.evaluate(points) ** 2])

    def prime(self, model: KernelExpansion, points: typing.Any) -> np.ndarray:
        grid, weights = self.__grid
        derivative = KernelExpansion(model.kernel, grid, 2.0 * weights * model.evaluate(grid))
        return derivative.evaluate(points)[:, np.newaxis]

    def as_section(self) -> typing.Dict[str, str]:
        return {"kind": self.kind, "region": str(self.__region), "nodes": str(self.__nodes)}


def _check_nodes(nodes: int, region: Box) -> int:
    if int(nodes) != nodes or nodes < 1:
        raise ContractViolationError("nodes >= 1", nodes)
    if nodes ** region.dim > 1_000_000:
        logging.getLogger(__name__).warning(ErrorMsg.TOO_MANY_NODES.format(nodes ** region.dim, region.dim))
    return int(nodes)


def psi_value(fun: Functional, model: KernelExpansion) -> np.ndarray:
    return fun.value(model)


def psi_prime_eval(fun: Functional, model: KernelExpansion, x: typing.Any) -> np.ndarray:
    """The vector ``(psi'_1(x), ..., psi'_m(x))`` at a single point."""
    point = utils.as_point(x, model.kernel.input_dim).reshape(1, -1)
    return fun.prime(model, point)[0]


def psi_matrix(fun: Functional, model: KernelExpansion, data) -> np.ndarray:
    """The ``m x n`` matrix with entries ``psi'_j(x_i)`` over the covariates of ``data``."""
    return fun.prime(model, data.xs).T


class RankTest(typing.NamedTuple):
    full_rank: bool
    numerical_rank: int


def rank_test(psi: np.ndarray, rtol: typing.Optional[float] = None) -> RankTest:
    """
    Numerical rank of the ``m x n`` matrix ``psi``. Full rank means every linear combination of the derivative
    functions is visible on the sample, which the covariance estimate needs to be nonsingular.
    """
    logger = logging.getLogger(__name__)
    arr = np.atleast_2d(np.asarray(psi, dtype=float))
    m, n = arr.shape
    if n < m:
        logger.warning(ErrorMsg.FEWER_POINTS_THAN_M.format(n, m))
    rank = numerics.matrix_rank(arr, rtol)
    if rank < m:
        logger.warning(ErrorMsg.RANK_DEFICIENT.format(rank, m))
    return RankTest(rank == m, rank)


"""---------------------------------------------------------------------------------------------------------------------
CONFIG GRAMMAR
---------------------------------------------------------------------------------------------------------------------"""


def _format_points(points: np.ndarray) -> str:
    return "; ".join(", ".join(repr(float(v)) for v in row) for row in np.atleast_2d(points))


def parse_vector(text: str, what: str = "vector") -> np.ndarray:
    """``"3, 0"`` to ``[3.0, 0.0]``."""
    try:
        values = np.array([float(part) for part in text.split(",") if part.strip()])
    except ValueError as err:
        raise ContractViolationError(f"a comma-separated {what}", ErrorMsg.UNPARSABLE.format(what, text)) from err
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ContractViolationError(f"a finite {what}", ErrorMsg.UNPARSABLE.format(what, text))
    return values


def parse_points(text: str, dim: int) -> np.ndarray:
    """``"1; 2; 3"`` or ``"3, 0; 2, 1"``: points split by ``;``, coordinates by ``,``."""
    rows = [parse_vector(part, "point") for part in text.split(";") if part.strip()]
    if not rows or any(row.size != dim for row in rows):
        raise ContractViolationError(f"points of dimension {dim}", ErrorMsg.UNPARSABLE.format("points", text))
    return np.vstack(rows)


def parse_box(text: str) -> Box:
    """``"0:5, -1:1"`` to the box ``[0, 5] x [-1, 1]``."""
    try:
        bounds = [tuple(float(v) for v in part.split(":")) for part in text.split(",") if part.strip()]
    except ValueError as err:
        raise ContractViolationError("lo:hi per axis", ErrorMsg.UNPARSABLE.format("region", text)) from err
    if not bounds or any(len(b) != 2 for b in bounds):
        raise ContractViolationError("lo:hi per axis", ErrorMsg.UNPARSABLE.format("region", text))
    return Box(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))


def _require(section: typing.Mapping[str, str], kind: str, key: str) -> str:
    if key not in section or not str(section[key]).strip():
        raise ContractViolationError(f"key {key}", ErrorMsg.MISSING_KEY.format(kind, key))
    return section[key]


def parse_functional(section: typing.Mapping[str, str], kernel: kernels.KernelSpec) -> Functional:
    """
    Build a functional from its config section, e.g. ``{"kind": "gradient", "x0": "3, 0", "domain": "0:5, -1:1"}``.
    :raises ContractViolationError: on unknown kinds, missing keys or values that do not parse
    """
    kind = str(section.get("kind", POINTWISE)).strip()
    dim = kernel.input_dim
    if kind == POINTWISE:
        return Pointwise(parse_points(_require(section, kind, "points"), dim))
    if kind == INNER_PRODUCTS:
        indices = sorted({int(match.group(1)) for key in section
                          for match in [re.fullmatch(r"h(\d+)_points", key)] if match})
        if not indices:
            raise ContractViolationError("key h1_points", ErrorMsg.MISSING_KEY.format(kind, "h1_points"))
        elements = []
        for j in indices:
            centers = parse_points(_require(section, kind, f"h{j}_points"), dim)
            coeffs = parse_vector(_require(section, kind, f"h{j}_coeffs"), "coefficients")
            elements.append(KernelExpansion(kernel, centers, coeffs))
        return InnerProducts(elements)
    if kind == GRADIENT:
        x0 = parse_vector(_require(section, kind, "x0"), "x0")
        if x0.size != dim:
            raise ContractViolationError(f"x0 of dimension {dim}", ErrorMsg.DIMENSION_MISMATCH.format(x0.size, dim))
        domain = parse_box(section["domain"]) if section.get("domain", "").strip() else None
        return GradientAt(x0, domain)
    nodes = int(section.get("nodes", "201") or 201)
    region = parse_box(_require(section, kind, "region")) if kind in (INTEGRAL, SQUARED_L2_NORM) else None
    if region is not None and region.dim != dim:
        raise ContractViolationError(f"a region of dimension {dim}",
                                     ErrorMsg.DIMENSION_MISMATCH.format(region.dim, dim))
    if kind == INTEGRAL:
        return IntegralOver(region,
                            str(section.get("measure", EMPIRICAL)).strip() or EMPIRICAL, nodes)
    if kind == SQUARED_H_NORM:
        return SquaredHNorm()
    if kind == SQUARED_L2_NORM:
        return SquaredL2Norm(region, nodes)
    raise ContractViolationError("a known functional kind", ErrorMsg.UNKNOWN_KIND.format(kind, ", ".join(KINDS)))
