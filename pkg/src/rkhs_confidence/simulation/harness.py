"""
Monte-Carlo coverage studies of the confidence sets.

Each replication draws a fresh dataset, picks ``lambda`` by cross-validation, fits, estimates the covariance and
checks whether the confidence set contains the reference value ``psi(f_{P, lambda0})``. That reference has no closed
form; it is approximated by fitting at ``lambda0`` on a much larger sample, twice with independent seeds so that its
own stability can be reported.
"""
from __future__ import annotations

import logging
import math
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from rkhs_confidence import errors, solver
from rkhs_confidence.confidence import build_ellipsoid
from rkhs_confidence.covariance import CovarianceMachinery
from rkhs_confidence.functionals import Box, Functional, GradientAt, Pointwise
from rkhs_confidence.kernels import KernelSpec, GAUSSIAN_RBF
from rkhs_confidence.losses import LossSpec, LOGISTIC_REGRESSION
from rkhs_confidence.model_selection import CrossValidation, constrain_grid
from rkhs_confidence.numerics import DegenerateCovarianceError
from rkhs_confidence.simulation import sampling
from rkhs_confidence.simulation.sampling import UNIVARIATE, BIVARIATE
from rkhs_confidence.utils import ContractViolationError

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    ORACLE_FIT = "Reference fit {} of 2 on {} points at lambda0={}."
    ORACLE_UNSTABLE = "Reference fits disagree by {} (margin {}); the coverage target is uncertain."
    ORACLE_DONE = "Reference target {} (spread {}, sup distance {}, L1 distance {})."
    REPLICATION_FAILED = "Replication {} failed and counts as not covered: {}"
    PROGRESS = "{} of {} replications done."
    COVERAGE = "Coverage {} +/- {} over {} replications ({} failed)."
    UNKNOWN_PRESET = "Scenario preset {} is not one of: {}."


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

DEFAULT_GRID = (1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 0.01)
ORACLE_MINIMUM = 50_000


@dataclass(frozen=True, eq=False)
class SimConfig:
    """
    :param scenario: ``univariate`` or ``bivariate`` data model
    :param functional: the functional whose confidence set is studied
    :param constrain: restrict the grid to ``[lambda0, lambda0 + constraint_c / sqrt(n ln n)]`` before selection
    :param oracle_n: size of each reference sample, defaults to ``max(100 n, 50000)``
    :param oracle_margin: largest tolerated disagreement of the two reference fits
    """
    scenario: str = UNIVARIATE
    functional: Functional = field(default_factory=lambda: Pointwise([3.0]))
    n: int = 500
    replications: int = 500
    alpha: float = 0.05
    lambda0: float = 1e-5
    grid: typing.Tuple[float, ...] = DEFAULT_GRID
    gamma: float = 0.5
    loss: str = LOGISTIC_REGRESSION
    sigma: float = 0.5
    folds: int = 5
    seed: int = 0
    workers: int = 1
    constrain: bool = False
    constraint_c: float = 1.0
    oracle_n: typing.Optional[int] = None
    oracle_margin: float = 0.01
    name: str = "custom"

    def __post_init__(self):
        if self.scenario not in sampling.SCENARIOS:
            raise ContractViolationError(f"a scenario in {sampling.SCENARIOS}", self.scenario)
        for key in ("n", "replications", "folds", "workers"):
            value = getattr(self, key)
            if int(value) != value or value < 1:
                raise ContractViolationError(f"{key} >= 1", value)
        for key in ("lambda0", "gamma", "sigma"):
            if not getattr(self, key) > 0:
                raise ContractViolationError(f"{key} > 0", getattr(self, key))
        if not 0.0 < self.alpha < 1.0:
            raise ContractViolationError("0 < alpha < 1", self.alpha)
        if not self.grid or min(self.grid) <= 0:
            raise ContractViolationError("a nonempty grid of positive values", self.grid)
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))

    @property
    def dim(self) -> int:
        return 1 if self.scenario == UNIVARIATE else 2

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(GAUSSIAN_RBF, self.dim, gamma=self.gamma)

    @property
    def loss_spec(self) -> LossSpec:
        return LossSpec(self.loss, self.sigma)

    @property
    def effective_oracle_n(self) -> int:
        return self.oracle_n if self.oracle_n is not None else max(100 * self.n, ORACLE_MINIMUM)


def scenario_config(name: str, **overrides) -> SimConfig:
    """
    Presets of the standard coverage studies: pointwise sets at ``x = 3`` (``univariate-1d``), at ``1, 2, 3, 4``
    (``univariate-4d``) and at ``1, 1.5, ..., 4`` (``univariate-7d``), and gradient sets at ``x = 3``
    (``gradient-1d``) and ``x = (3, 0)`` in the bivariate model (``gradient-2d``).
    """
    presets: typing.Dict[str, typing.Callable[[], SimConfig]] = {
        "univariate-1d": lambda: SimConfig(UNIVARIATE, Pointwise([3.0])),
        "univariate-4d": lambda: SimConfig(UNIVARIATE, Pointwise([1.0, 2.0, 3.0, 4.0])),
        "univariate-7d": lambda: SimConfig(UNIVARIATE, Pointwise(np.arange(1.0, 4.01, 0.5))),
        "gradient-1d": lambda: SimConfig(UNIVARIATE, GradientAt([3.0], Box((0.0,), (5.0,)))),
        "gradient-2d": lambda: SimConfig(BIVARIATE, GradientAt([3.0, 0.0], Box((0.0, -1.0), (5.0, 1.0))),
                                         gamma=1.0 / 3.0),
    }
    if name not in presets:
        raise ContractViolationError("a known scenario preset",
                                     ErrorMsg.UNKNOWN_PRESET.format(name, ", ".join(presets)))
    return replace(presets[name](), name=name, **overrides)


@dataclass(frozen=True, eq=False)
class ReferenceTarget:
    """
    :param value: ``psi`` of the reference fit, averaged over both reference samples
    :param spread: largest coordinate difference between the two reference fits
    :param stable: whether ``spread`` is within the configured margin
    :param sup_distance: largest gap between the reference fit and the regression function on a grid
    :param l1_distance: mean absolute gap under the covariate distribution
    :param model: the first reference fit
    """
    value: np.ndarray
    spread: float
    stable: bool
    sup_distance: float
    l1_distance: float
    model: typing.Optional[solver.FittedModel] = None


def _grid_of(scenario: str, per_axis: int) -> np.ndarray:
    lower, upper = sampling.input_box(scenario)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([axis.ravel() for axis in mesh])


def reference_target(scenario: str,
                     lambda0: float,
                     fun: Functional,
                     oracle_n: int,
                     seed: int,
                     kernel: typing.Optional[KernelSpec] = None,
                     loss: typing.Optional[LossSpec] = None,
                     margin: float = 0.01) -> ReferenceTarget:
    """
    Approximate ``psi(f_{P, lambda0})`` by fits on two independent samples of ``oracle_n`` points.
    A disagreement beyond ``margin`` is logged as a warning and reported, not raised.
    """
    logger = logging.getLogger(__name__)
    dim = 1 if scenario == UNIVARIATE else 2
    kernel = kernel if kernel is not None else KernelSpec(GAUSSIAN_RBF, dim, gamma=0.5 if dim == 1 else 1.0 / 3.0)
    loss = loss if loss is not None else LossSpec(LOGISTIC_REGRESSION, 0.5)
    models = []
    for copy in range(2):
        logger.info(ErrorMsg.ORACLE_FIT.format(copy + 1, oracle_n, lambda0))
        data = sampling.generate(scenario, oracle_n, sampling.stream(seed, sampling.ORACLE_STREAM + copy))
        models.append(solver.fit(data, kernel, loss, lambda0))
    values = [np.atleast_1d(fun.value(model)) for model in models]
    spread = float(np.max(np.abs(values[0] - values[1])))
    stable = spread <= margin
    if not stable:
        logger.warning(ErrorMsg.ORACLE_UNSTABLE.format(spread, margin))

    grid = _grid_of(scenario, 1001 if dim == 1 else 201)
    gap = np.abs(models[0].evaluate(grid) - sampling.true_function(scenario)(grid))
    target = ReferenceTarget(0.5 * (values[0] + values[1]), spread, stable, float(np.max(gap)), float(np.mean(gap)),
                             models[0])
    logger.info(ErrorMsg.ORACLE_DONE.format(target.value, spread, target.sup_distance, target.l1_distance))
    return target


@dataclass(frozen=True, eq=False)
class ReplicationRecord:
    """Outcome of one replication; ``covered`` is ``False`` and ``error`` set when it failed."""
    index: int
    covered: bool
    lam: float = math.nan
    estimate: typing.Optional[np.ndarray] = None
    sigma_hat: typing.Optional[np.ndarray] = None
    length: float = math.nan
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass(frozen=True, eq=False)
class CoverageReport:
    """
    :param coverage: covered replications over all replications, failures count as not covered
    :param margin: binomial ``1.96 * sqrt(p (1 - p) / R)``
    :param population_covariance: empirical covariance of ``sqrt(n) (psi_hat - target)`` across replications
    """
    config: SimConfig
    target: ReferenceTarget
    coverage: float
    margin: float
    failures: int
    mean_length: float
    length_sd: float
    records: typing.Tuple[ReplicationRecord, ...]
    population_covariance: typing.Optional[np.ndarray]


def binomial_margin(p: float, replications: int) -> float:
    """Half-width of the normal-approximation 95% interval of a proportion."""
    if replications < 1:
        raise ContractViolationError("replications >= 1", replications)
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / replications)


def select_lambda(cfg: SimConfig, data: solver.Dataset, rng: np.random.Generator) -> float:
    grid = constrain_grid(cfg.grid, cfg.lambda0, cfg.constraint_c, data.n) if cfg.constrain else cfg.grid
    return CrossValidation(cfg.kernel, cfg.loss_spec, cfg.folds).select(data, grid, rng).lam


def run_replication(cfg: SimConfig, index: int, target: np.ndarray) -> ReplicationRecord:
    """
    One replication, drawing from stream ``index + 1`` of ``cfg.seed``. Numerical failures and broken contracts are
    caught and recorded.
    """
    rng = sampling.stream(cfg.seed, index + 1)
    try:
        data = sampling.generate(cfg.scenario, cfg.n, rng)
        lam = select_lambda(cfg, data, rng)
        model = solver.fit(data, cfg.kernel, cfg.loss_spec, lam)
        estimate = np.atleast_1d(cfg.functional.value(model))
        cov = CovarianceMachinery(data, model).sigma_hat(cfg.functional)
        ellipsoid = build_ellipsoid(estimate, cov, data.n, cfg.alpha)
    except (ArithmeticError, ContractViolationError, np.linalg.LinAlgError) as err:
        return ReplicationRecord(index, False, error=f"{err.__class__.__name__}: {err}")
    length = ellipsoid.length if ellipsoid.m == 1 else math.nan
    return ReplicationRecord(index, ellipsoid.contains(target), lam, estimate, cov.sigma_hat, length)


def _replication_worker(args: typing.Tuple[SimConfig, int, np.ndarray]) -> ReplicationRecord:
    # top-level so that ProcessPoolExecutor can pickle it
    return run_replication(*args)


class CoverageExperiment:
    """Runs :func:`run_replication` for every replication, in worker processes when ``cfg.workers > 1``."""

    def __init__(self, cfg: SimConfig, target: typing.Optional[ReferenceTarget] = None):
        self.__logger = logging.getLogger(self.__class__.__name__)
        self.__cfg = cfg
        self.__target = target

    def __records(self, target: np.ndarray) -> typing.Iterator[ReplicationRecord]:
        tasks = [(self.__cfg, index, target) for index in range(self.__cfg.replications)]
        if self.__cfg.workers == 1:
            yield from map(_replication_worker, tasks)
            return
        with ProcessPoolExecutor(max_workers=self.__cfg.workers) as executor:
            # map keeps submission order, so the reduce below is deterministic
            yield from executor.map(_replication_worker, tasks)

    def run(self) -> CoverageReport:
        cfg = self.__cfg
        target = self.__target if self.__target is not None else reference_target(
            cfg.scenario, cfg.lambda0, cfg.functional, cfg.effective_oracle_n, cfg.seed, cfg.kernel, cfg.loss_spec,
            cfg.oracle_margin)

        records = []
        step = max(1, cfg.replications // 10)
        for record in self.__records(target.value):
            if record.failed:
                self.__logger.warning(ErrorMsg.REPLICATION_FAILED.format(record.index, record.error))
            records.append(record)
            if len(records) % step == 0 or len(records) == cfg.replications:
                self.__logger.info(ErrorMsg.PROGRESS.format(len(records), cfg.replications))
        return self.__summarise(target, records)

    def __summarise(self, target: ReferenceTarget, records: typing.List[ReplicationRecord]) -> CoverageReport:
        cfg = self.__cfg
        covered = sum(1 for record in records if record.covered)
        failures = sum(1 for record in records if record.failed)
        coverage = covered / cfg.replications
        lengths = np.array([record.length for record in records
                            if not record.failed and not math.isnan(record.length)])
        mean_length = float(np.mean(lengths)) if lengths.size else math.nan
        length_sd = float(np.std(lengths, ddof=1)) if lengths.size > 1 else math.nan

        estimates = np.array([record.estimate for record in records if not record.failed])
        population = None
        if estimates.shape[0] > 1:
            scaled = math.sqrt(cfg.n) * (estimates - target.value)
            population = np.atleast_2d(np.cov(scaled, rowvar=False))
        margin = binomial_margin(coverage, cfg.replications)
        self.__logger.info(ErrorMsg.COVERAGE.format(coverage, margin, cfg.replications, failures))
        return CoverageReport(cfg, target, coverage, margin, failures, mean_length, length_sd, tuple(records),
                              population)


def coverage_experiment(cfg: SimConfig, target: typing.Optional[ReferenceTarget] = None) -> CoverageReport:
    """
    :param target: precomputed reference, computed from ``cfg`` when omitted
    """
    return CoverageExperiment(cfg, target).run()


"""---------------------------------------------------------------------------------------------------------------------
BANDS
---------------------------------------------------------------------------------------------------------------------"""


class BandRow(typing.NamedTuple):
    x: np.ndarray
    center: float
    lo: float
    hi: float
    degenerate: bool


def band_data(model: solver.FittedModel,
              data: solver.Dataset,
              grid: typing.Any,
              alpha: float,
              machinery: typing.Optional[CovarianceMachinery] = None) -> typing.List[BandRow]:
    """
    Pointwise ``1 - alpha`` intervals at every grid point, each on its own; together they are not a simultaneous band.
    A singular variance at a grid point flags the row instead of failing.
    """
    machinery = machinery if machinery is not None else CovarianceMachinery(data, model)
    points = np.atleast_2d(np.asarray(grid, dtype=float))
    if model.kernel.input_dim == 1:
        points = points.reshape(-1, 1)
    pointwise = Pointwise(points)
    centers = pointwise.value(model)
    variances = np.diag(machinery.sigma_hat(pointwise).sigma_hat)
    rows = []
    for x, center, variance in zip(points, centers, variances):
        try:
            lo, hi = build_ellipsoid([center], [[variance]], data.n, alpha).interval()
            rows.append(BandRow(x, float(center), lo, hi, False))
        except DegenerateCovarianceError:
            rows.append(BandRow(x, float(center), math.nan, math.nan, True))
    return rows
