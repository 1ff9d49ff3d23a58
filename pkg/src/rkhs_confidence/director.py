"""
Director is the class that turns a :class:`RunConfig` into artifacts. It creates the objects every command needs (data,
kernel, loss, the fitted model) and hands them to the module that does the work.

Here's what each command leaves in the output folder:

└── **fit**       model.txt, coefficients.csv
└── **ci**        ellipsoid.txt, summary.txt, g_values.csv
└── **simulate**  coverage.txt, replications.csv, sigma_hat.csv
└── **band**      band.csv

Every command also writes cv.csv when lambda was cross-validated, and effective.cfg, which reproduces the run.
"""
from __future__ import annotations

import itertools
import logging
import os
import typing

import numpy as np

from rkhs_confidence import errors, functionals, ingest, report, solver
from rkhs_confidence.config import RunConfig, SCHEMA, dump_config
from rkhs_confidence.confidence import build_ellipsoid
from rkhs_confidence.covariance import CovarianceMachinery, dense_operator_inverse
from rkhs_confidence.functionals import Box, Pointwise, parse_box, parse_functional
from rkhs_confidence.kernels import KernelSpec, GAUSSIAN_RBF
from rkhs_confidence.losses import LossSpec
from rkhs_confidence.model_selection import CrossValidation, constrain_grid
from rkhs_confidence.simulation import harness, sampling
from rkhs_confidence.simulation.harness import SimConfig
from rkhs_confidence.solver import Dataset, FittedModel
from rkhs_confidence.utils import ContractViolationError, create_and_open

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    NO_DATA = "a data file in [data] path or --data"
    MEDIAN_GAMMA = "Median heuristic chose gamma={}."
    LAMBDA_FIXED = "Using the configured lambda={}."
    LAMBDA_SELECTED = "Cross-validation over {} values chose lambda={}."
    FITTED = "Fit done: n={}, lambda={}, {} Newton iterations, rank {}."
    SIGMA_DONE = "Covariance estimate computed for {} (m={})."
    VERIFY = "Fast and dense inverse sections differ by at most {} over {} points."
    ARTIFACT = "Wrote {}."
    RBF_ONLY = "the gaussian-rbf kernel in simulations"
    NO_BAND_GRID = "a band region in [output] band_region"


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""

# points checked by ``ci --verify``, the dense solve costs O(n^3) each
VERIFY_POINTS = 5


class Director:
    """
    Orchestrates one run of the command named in ``[task] command``.

    How to run
    ----------
    Instantiate with the effective configuration and call :meth:`run`. Everything else is private; the artifacts
    written are listed in :attr:`artifacts` afterwards.
    """

    def __init__(self, cfg: RunConfig):
        self.__logger = logging.getLogger(self.__class__.__name__)
        self.__cfg = cfg
        self.__destination = cfg.directory
        self.__artifacts: typing.List[str] = []

    def run(self) -> int:
        """
        :returns: exit status 0; every failure is raised to the caller
        """
        self.__save_text("effective.cfg", dump_config(self.__cfg))
        commands = {
            "fit": self.__fit,
            "ci": self.__ci,
            "simulate": self.__simulate,
            "band": self.__band,
        }
        commands[self.__cfg.command]()
        return 0

    @property
    def artifacts(self) -> typing.List[str]:
        return list(self.__artifacts)

    """-------------------------------------------------------------------------------------------------------------
    BUILDING BLOCKS
    -------------------------------------------------------------------------------------------------------------"""

    def __path(self, name: str) -> str:
        path = os.path.join(self.__destination, name)
        self.__artifacts.append(path)
        self.__logger.debug(ErrorMsg.ARTIFACT.format(path))
        return path

    def __save_text(self, name: str, text: str):
        with create_and_open(self.__path(name), "w") as file:
            file.write(text)

    def __load_data(self) -> Dataset:
        path = self.__cfg.get("data", "path")
        if not path:
            raise ContractViolationError(ErrorMsg.NO_DATA, "no data path")
        return ingest.load_csv(path, self.__cfg.get("data", "task"))

    def __kernel(self, data: Dataset) -> KernelSpec:
        cfg = self.__cfg
        if cfg.get("kernel", "gamma").strip() == "median":
            gamma = ingest.median_heuristic_gamma(data)
            self.__logger.info(ErrorMsg.MEDIAN_GAMMA.format(gamma))
        else:
            gamma = cfg.real("kernel", "gamma")
        return KernelSpec(cfg.get("kernel", "family"), data.dim, gamma, cfg.integer("kernel", "degree"),
                          cfg.real("kernel", "offset"), cfg.real("kernel", "scale"))

    def __loss(self) -> LossSpec:
        return LossSpec(self.__cfg.get("loss", "family"), self.__cfg.real("loss", "sigma"))

    def __lambda(self, data: Dataset, kernel: KernelSpec, loss: LossSpec) -> float:
        cfg = self.__cfg
        lam = cfg.real("lambda", "value")
        if lam is not None:
            self.__logger.info(ErrorMsg.LAMBDA_FIXED.format(lam))
            return lam
        grid = cfg.reals("lambda", "grid")
        if cfg.flag("lambda", "constrain"):
            grid = constrain_grid(grid, cfg.real("lambda", "lambda0"), cfg.real("lambda", "c"), data.n)
        selection = CrossValidation(kernel, loss, cfg.integer("lambda", "folds")).select(data, grid, cfg.seed)
        report.write_rows(self.__path("cv.csv"), ["lambda", "cv_loss"], zip(selection.grid, selection.cv_losses))
        self.__logger.info(ErrorMsg.LAMBDA_SELECTED.format(len(selection.grid), selection.lam))
        return selection.lam

    def __fit_model(self, data: Dataset) -> FittedModel:
        kernel = self.__kernel(data)
        loss = self.__loss()
        lam = self.__lambda(data, kernel, loss)
        model = solver.fit(data, kernel, loss, lam)
        diagnostics = model.diagnostics
        self.__logger.info(ErrorMsg.FITTED.format(data.n, lam, diagnostics.iterations, diagnostics.rank))
        return model

    """-------------------------------------------------------------------------------------------------------------
    COMMANDS
    -------------------------------------------------------------------------------------------------------------"""

    def __fit(self):
        data = self.__load_data()
        model = self.__fit_model(data)
        diagnostics = model.diagnostics
        report.save_summary(self.__path("model.txt"), [
            ("kernel", str(model.kernel)),
            ("loss", str(model.loss)),
            ("lambda", model.lam),
            ("n", data.n),
            ("d", data.dim),
            ("iterations", diagnostics.iterations),
            ("gradient_norm", diagnostics.gradient_norm),
            ("objective", diagnostics.objective),
            ("rank", diagnostics.rank),
            ("h_norm_sq", model.h_norm_sq()),
        ], comments=["regularised kernel fit"])
        header = [f"x{j}" for j in range(1, data.dim + 1)] + ["coefficient", "fitted"]
        rows = (list(x) + [c, f] for x, c, f in zip(model.centers, model.coeffs, model.fitted_values))
        report.write_rows(self.__path("coefficients.csv"), header, rows)

    def __ci(self):
        cfg = self.__cfg
        data = self.__load_data()
        model = self.__fit_model(data)
        fun = parse_functional(cfg.section("functional"), model.kernel)
        functionals.rank_test(functionals.psi_matrix(fun, model, data))

        machinery = CovarianceMachinery(data, model)
        estimate = machinery.sigma_hat(fun)
        self.__logger.info(ErrorMsg.SIGMA_DONE.format(fun, fun.m))
        ellipsoid = build_ellipsoid(fun.value(model), estimate, data.n, cfg.alpha)
        axes = ellipsoid.principal_axes()

        items = [
            ("functional", str(fun)),
            ("m", fun.m),
            ("n", data.n),
            ("alpha", ellipsoid.alpha),
            ("lambda", model.lam),
            ("chi2", ellipsoid.chi2),
            ("center", ellipsoid.center),
            ("sigma_hat", ellipsoid.sigma_hat),
            ("axis_lengths", [axis.length for axis in axes]),
            ("axis_directions", np.array([axis.direction for axis in axes])),
            ("volume", ellipsoid.volume()),
        ]
        lines = [f"{fun} at level {1.0 - ellipsoid.alpha!r}, n = {data.n}, lambda = {model.lam!r}"]
        if fun.m == 1:
            lo, hi = ellipsoid.interval()
            items.append(("interval", [lo, hi]))
            lines.append(f"interval [{lo!r}, {hi!r}]")
        else:
            lines.append(f"center {report.format_value(ellipsoid.center)}")
            lines.extend(f"axis {report.format_real(axis.length)} along {report.format_value(axis.direction)}"
                         for axis in axes)
        if cfg.flag("output", "verify"):
            gap = self.__verify(data, model, machinery)
            items.append(("verify_max_gap", gap))
            lines.append(f"fast and dense covariance paths agree within {gap!r}")

        report.save_summary(self.__path("ellipsoid.txt"), items, comments=["asymptotic confidence ellipsoid"])
        self.__save_text("summary.txt", "\n".join(lines) + "\n")
        for line in lines:
            self.__logger.info(line)
        report.write_rows(self.__path("g_values.csv"), [f"g{j}" for j in range(1, fun.m + 1)], estimate.g_values)

    def __verify(self, data: Dataset, model: FittedModel, machinery: CovarianceMachinery) -> float:
        checked = data.xs[:VERIFY_POINTS]
        gap = 0.0
        for x in checked:
            fast = machinery.inverse_section(x)
            dense = dense_operator_inverse(data, model, x)
            points = np.vstack([data.xs, x.reshape(1, -1)])
            gap = max(gap, float(np.max(np.abs(fast.evaluate(points) - dense.evaluate(points)))))
        self.__logger.info(ErrorMsg.VERIFY.format(gap, len(checked)))
        return gap

    def __sim_config(self) -> SimConfig:
        cfg = self.__cfg
        if cfg.get("kernel", "family") != GAUSSIAN_RBF:
            raise ContractViolationError(ErrorMsg.RBF_ONLY, cfg.get("kernel", "family"))
        fields = {
            ("task", "alpha"): ("alpha", cfg.alpha),
            ("task", "seed"): ("seed", cfg.seed),
            ("kernel", "gamma"): ("gamma", cfg.real("kernel", "gamma")),
            ("loss", "family"): ("loss", cfg.get("loss", "family")),
            ("loss", "sigma"): ("sigma", cfg.real("loss", "sigma")),
            ("lambda", "grid"): ("grid", cfg.reals("lambda", "grid")),
            ("lambda", "folds"): ("folds", cfg.integer("lambda", "folds")),
            ("lambda", "lambda0"): ("lambda0", cfg.real("lambda", "lambda0")),
            ("lambda", "constrain"): ("constrain", cfg.flag("lambda", "constrain")),
            ("lambda", "c"): ("constraint_c", cfg.real("lambda", "c")),
            ("simulation", "n"): ("n", cfg.integer("simulation", "n")),
            ("simulation", "replications"): ("replications", cfg.integer("simulation", "replications")),
            ("simulation", "workers"): ("workers", cfg.integer("simulation", "workers")),
            ("simulation", "oracle_n"): ("oracle_n", cfg.integer("simulation", "oracle_n")),
            ("simulation", "oracle_margin"): ("oracle_margin", cfg.real("simulation", "oracle_margin")),
        }
        preset = cfg.get("simulation", "preset")
        if preset:
            # a preset keeps its own settings unless the configuration changes them
            changed = {name: value for (section, key), (name, value) in fields.items()
                       if cfg.get(section, key) != SCHEMA[section][key]}
            return harness.scenario_config(preset, **changed)
        scenario = cfg.get("simulation", "scenario")
        dim = len(sampling.input_box(scenario)[0])
        fun = parse_functional(cfg.section("functional"), KernelSpec(GAUSSIAN_RBF, dim, cfg.real("kernel", "gamma")))
        return SimConfig(scenario, fun, **dict(fields.values()))

    def __simulate(self):
        sim = self.__sim_config()
        result = harness.coverage_experiment(sim)
        target = result.target
        items = [
            ("name", sim.name),
            ("scenario", sim.scenario),
            ("functional", str(sim.functional)),
            ("n", sim.n),
            ("replications", sim.replications),
            ("alpha", sim.alpha),
            ("lambda0", sim.lambda0),
            ("seed", sim.seed),
            ("oracle_n", sim.effective_oracle_n),
            ("target", target.value),
            ("target_spread", target.spread),
            ("target_stable", target.stable),
            ("oracle_sup_distance", target.sup_distance),
            ("oracle_l1_distance", target.l1_distance),
            ("coverage", result.coverage),
            ("margin", result.margin),
            ("failures", result.failures),
            ("mean_length", result.mean_length),
            ("length_sd", result.length_sd),
            ("population_covariance", result.population_covariance),
        ]
        # worker count stays out of the report, it must not change a byte
        report.save_summary(self.__path("coverage.txt"), items, comments=["coverage study"])

        m = sim.functional.m
        header = (["index", "covered", "failed", "lambda", "length"] + [f"estimate{j}" for j in range(1, m + 1)]
                  + ["error"])
        rows = ([record.index, record.covered, record.failed, record.lam, record.length]
                + (list(record.estimate) if record.estimate is not None else [np.nan] * m) + [record.error]
                for record in result.records)
        report.write_rows(self.__path("replications.csv"), header, rows)

        pairs = list(itertools.product(range(1, m + 1), repeat=2))
        report.write_rows(self.__path("sigma_hat.csv"), ["index"] + [f"s{i}{j}" for i, j in pairs],
                          ([record.index] + list(record.sigma_hat.ravel())
                           for record in result.records if record.sigma_hat is not None))

    def __band(self):
        cfg = self.__cfg
        scenario = None if cfg.get("data", "path") else cfg.get("simulation", "scenario")
        if scenario is None:
            data = self.__load_data()
        else:
            data = sampling.generate(scenario, cfg.integer("simulation", "n"), sampling.stream(cfg.seed, 0))
        model = self.__fit_model(data)

        region_text = cfg.get("output", "band_region")
        if region_text:
            region = parse_box(region_text)
        elif scenario is not None:
            region = Box(*sampling.input_box(scenario))
        else:
            region = Box(tuple(data.xs.min(axis=0)), tuple(data.xs.max(axis=0)))
        if region.dim != data.dim:
            raise ContractViolationError(ErrorMsg.NO_BAND_GRID,
                                         ErrorMsg.DIMENSION_MISMATCH.format(region.dim, data.dim))
        per_axis = cfg.integer("output", "band_points")
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(region.lower, region.upper)]
        grid = np.column_stack([axis.ravel() for axis in np.meshgrid(*axes, indexing="ij")])

        rows = harness.band_data(model, data, grid, cfg.alpha)
        header = [f"x{j}" for j in range(1, data.dim + 1)] + ["center", "lo", "hi", "degenerate"]
        table = [list(row.x) + [row.center, row.lo, row.hi, row.degenerate] for row in rows]
        if scenario is not None:
            oracle_n = cfg.integer("simulation", "oracle_n")
            target = harness.reference_target(
                scenario, cfg.real("lambda", "lambda0"), Pointwise(grid),
                oracle_n if oracle_n is not None else max(100 * data.n, harness.ORACLE_MINIMUM), cfg.seed,
                model.kernel, model.loss, cfg.real("simulation", "oracle_margin"))
            truth = sampling.true_function(scenario)(grid)
            header += ["truth", "oracle"]
            table = [row + [t, o] for row, t, o in zip(table, truth, target.value)]
        report.write_rows(self.__path("band.csv"), header, table)

    def __repr__(self):
        return (f"{self.__class__.__name__}("
                f"command={self.__cfg.command}, "
                f"to={self.__destination}, "
                f"artifacts={len(self.__artifacts)})")
