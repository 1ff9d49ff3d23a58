"""
Sets up all necessary options and arguments.
.
├── [task]
│   ├── command        fit | ci | simulate | band
│   ├── alpha
│   └── seed
├── [data]
│   ├── path
│   └── task           regression | classification
├── [kernel]           family, gamma (a number or "median"), degree, offset, scale
├── [loss]             family, sigma
├── [lambda]           value, grid, folds, lambda0, constrain, c
├── [functional]       kind, points, x0, domain, region, measure, nodes, h<j>_points, h<j>_coeffs
├── [simulation]       preset, scenario, n, replications, workers, oracle_n, oracle_margin
└── [output]           directory, band_region, band_points, verify

Precedence, lowest first: DEFAULTS, the --config file, the console shortcuts, --set overrides.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import re
import typing
from collections import namedtuple
from dataclasses import dataclass
from typing import List, Any

from rkhs_confidence import errors, utils
from rkhs_confidence.utils import ContractViolationError, CouldNotLoadFileError, TextLoader

"""---------------------------------------------------------------------------------------------------------------------
ERRORS
---------------------------------------------------------------------------------------------------------------------"""


class ErrorMsg(errors.ErrorMsgBase):
    KEY_REJECTED = "Configuration key {} rejected: no such key in section [{}]."
    SECTION_REJECTED = "Configuration section [{}] rejected: known sections are {}."
    OVERRIDE_SYNTAX = "an override of the form section.key=value"
    LOADED = "Configuration loaded from {}."
    VALUE = "{} for {}.{}"


class ConfigKeyError(ContractViolationError):
    """Unknown configuration key {} in section [{}]."""

    def __init__(self, key: typing.Optional[str], section: str):
        super().__init__(key if key is not None else "(whole section)", section)


class ConfigSyntaxError(ContractViolationError):
    """The configuration {} could not be parsed: {}."""

    def __init__(self, source: str, reason: str):
        super().__init__(source, reason)


class MissingReferencedFileError(CouldNotLoadFileError):
    """The configuration refers to {}, which does not exist."""

    def __init__(self, path: str):
        super().__init__(path)


"""---------------------------------------------------------------------------------------------------------------------
DEFAULTS
---------------------------------------------------------------------------------------------------------------------"""

# I chose namedtuple for immutability
DefaultSettings = namedtuple('DefaultSettings', [
    "alpha",
    "seed",
    "task",
    "kernel",
    "gamma",
    "degree",
    "offset",
    "scale",
    "loss",
    "sigma",
    "grid",
    "folds",
    "lambda0",
    "constraint_c",
    "kind",
    "nodes",
    "scenario",
    "n",
    "replications",
    "workers",
    "oracle_margin",
    "destination",
    "band_points",
])
DEFAULTS = DefaultSettings(
    alpha=0.05,
    seed=0,
    task="regression",
    kernel="gaussian-rbf",
    gamma="0.5",
    degree=2,
    offset=1.0,
    scale=1.0,
    loss="logistic-regression",
    sigma=0.5,
    grid=(1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 0.01),
    folds=5,
    lambda0=1e-5,
    constraint_c=1.0,
    kind="pointwise",
    nodes=201,
    scenario="univariate",
    n=500,
    replications=500,
    workers=1,
    oracle_margin=0.01,
    destination="results",
    band_points=101,
)

COMMANDS = ("fit", "ci", "simulate", "band")


def _text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_text(v) for v in value)
    return str(value)


# every key the files may set, with its default as it would be written in a file
SCHEMA: typing.Dict[str, typing.Dict[str, str]] = {
    "task": {"command": "fit", "alpha": _text(DEFAULTS.alpha), "seed": _text(DEFAULTS.seed)},
    "data": {"path": "", "task": DEFAULTS.task},
    "kernel": {"family": DEFAULTS.kernel, "gamma": DEFAULTS.gamma, "degree": _text(DEFAULTS.degree),
               "offset": _text(DEFAULTS.offset), "scale": _text(DEFAULTS.scale)},
    "loss": {"family": DEFAULTS.loss, "sigma": _text(DEFAULTS.sigma)},
    "lambda": {"value": "", "grid": _text(DEFAULTS.grid), "folds": _text(DEFAULTS.folds),
               "lambda0": _text(DEFAULTS.lambda0), "constrain": "false", "c": _text(DEFAULTS.constraint_c)},
    "functional": {"kind": DEFAULTS.kind, "points": "", "x0": "", "domain": "", "region": "", "measure": "empirical",
                   "nodes": _text(DEFAULTS.nodes)},
    "simulation": {"preset": "", "scenario": DEFAULTS.scenario, "n": _text(DEFAULTS.n),
                   "replications": _text(DEFAULTS.replications), "workers": _text(DEFAULTS.workers),
                   "oracle_n": "", "oracle_margin": _text(DEFAULTS.oracle_margin)},
    "output": {"directory": DEFAULTS.destination, "band_region": "", "band_points": _text(DEFAULTS.band_points),
               "verify": "false"},
}

# inner-product elements are numbered, h1_points, h1_coeffs, h2_points, ...
ELEMENT_KEY = re.compile(r"h[1-9]\d*_(points|coeffs)")


def _is_known(section: str, key: str) -> bool:
    return key in SCHEMA[section] or (section == "functional" and ELEMENT_KEY.fullmatch(key) is not None)


"""---------------------------------------------------------------------------------------------------------------------
MAIN
---------------------------------------------------------------------------------------------------------------------"""


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration, every value kept as the text a config file would hold."""
    sections: typing.Mapping[str, typing.Mapping[str, str]]

    def get(self, section: str, key: str) -> str:
        return self.sections[section].get(key, "")

    def section(self, name: str) -> typing.Dict[str, str]:
        return dict(self.sections[name])

    def real(self, section: str, key: str) -> typing.Optional[float]:
        text = self.get(section, key).strip()
        if not text:
            return None
        try:
            return float(text)
        except ValueError as err:
            raise ContractViolationError(ErrorMsg.VALUE.format("a number", section, key), text) from err

    def integer(self, section: str, key: str) -> typing.Optional[int]:
        text = self.get(section, key).strip()
        if not text:
            return None
        try:
            return int(text)
        except ValueError as err:
            raise ContractViolationError(ErrorMsg.VALUE.format("an integer", section, key), text) from err

    def flag(self, section: str, key: str) -> bool:
        text = self.get(section, key).strip().lower()
        if text in ("true", "yes", "on", "1"):
            return True
        if text in ("false", "no", "off", "0", ""):
            return False
        raise ContractViolationError(ErrorMsg.VALUE.format("a boolean", section, key), text)

    def reals(self, section: str, key: str) -> typing.Tuple[float, ...]:
        text = self.get(section, key).strip()
        try:
            return tuple(float(cell) for cell in text.split(",") if cell.strip())
        except ValueError as err:
            raise ContractViolationError(ErrorMsg.VALUE.format("a comma-separated list of numbers", section, key),
                                         text) from err

    @property
    def command(self) -> str:
        return self.get("task", "command")

    @property
    def seed(self) -> int:
        return self.integer("task", "seed")

    @property
    def alpha(self) -> float:
        return self.real("task", "alpha")

    @property
    def directory(self) -> str:
        return self.get("output", "directory")


# keys whose text must convert, checked at load so that a run never fails halfway on a typo
_TYPED_KEYS: typing.Dict[str, typing.Tuple[typing.Tuple[str, str], ...]] = {
    "real": (("task", "alpha"), ("kernel", "offset"), ("kernel", "scale"), ("loss", "sigma"), ("lambda", "value"),
             ("lambda", "lambda0"), ("lambda", "c"), ("simulation", "oracle_margin")),
    "integer": (("task", "seed"), ("kernel", "degree"), ("lambda", "folds"), ("functional", "nodes"),
                ("simulation", "n"), ("simulation", "replications"), ("simulation", "workers"),
                ("simulation", "oracle_n"), ("output", "band_points")),
    "flag": (("lambda", "constrain"), ("output", "verify")),
    "reals": (("lambda", "grid"),),
}


def _validate(cfg: RunConfig) -> None:
    for converter, keys in _TYPED_KEYS.items():
        for section, key in keys:
            getattr(cfg, converter)(section, key)
    if cfg.command not in COMMANDS:
        raise ContractViolationError(f"a command in {COMMANDS}", cfg.command)
    gamma = cfg.get("kernel", "gamma").strip()
    if gamma != "median":
        cfg.real("kernel", "gamma")


def parse_override(text: str) -> typing.Tuple[str, str, str]:
    """``"kernel.gamma=0.25"`` to ``("kernel", "gamma", "0.25")``."""
    target, separator, value = text.partition("=")
    section, dot, key = target.strip().partition(".")
    if not separator or not dot or not section or not key:
        raise ContractViolationError(ErrorMsg.OVERRIDE_SYNTAX, text)
    return section.strip().lower(), key.strip().lower(), value.strip()


def _put(sections: typing.Dict[str, typing.Dict[str, str]], section: str, key: str, value: str) -> None:
    if section not in SCHEMA:
        logging.getLogger(__name__).error(ErrorMsg.SECTION_REJECTED.format(section, ", ".join(SCHEMA)))
        raise ConfigKeyError(None, section)
    if not _is_known(section, key):
        logging.getLogger(__name__).error(ErrorMsg.KEY_REJECTED.format(key, section))
        raise ConfigKeyError(key, section)
    sections[section][key] = value


def load_config(path: typing.Optional[str] = None,
                overrides: typing.Iterable[typing.Tuple[str, str, str]] = ()) -> RunConfig:
    """
    :param path: optional config file; everything it leaves out keeps its default
    :param overrides: ``(section, key, value)`` triples applied after the file, in order
    :raises CouldNotLoadFileError: if the config file cannot be read
    :raises ConfigSyntaxError: if it is not sectioned ``key = value`` text
    :raises ConfigKeyError: on unknown sections or keys
    :raises MissingReferencedFileError: if the data path does not exist
    :raises ContractViolationError: on values that do not convert
    """
    sections = {name: dict(keys) for name, keys in SCHEMA.items()}
    if path is not None:
        with TextLoader().load(path) as text:
            parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                               default_section="__defaults__")
            try:
                parser.read_string(text, source=path)
            except configparser.Error as err:
                raise ConfigSyntaxError(path, str(err).splitlines()[0]) from err
        for name in parser.sections():
            for key, value in parser.items(name, raw=True):
                _put(sections, name.lower(), key, value.strip())
        logging.getLogger(__name__).debug(ErrorMsg.LOADED.format(path))
    for section, key, value in overrides:
        _put(sections, section, key, value)

    data_path = sections["data"]["path"].strip()
    if data_path:
        data_path = utils.expand_path(data_path)
        if not os.path.isfile(data_path):
            raise MissingReferencedFileError(data_path)
        sections["data"]["path"] = data_path
    cfg = RunConfig(sections)
    _validate(cfg)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Render ``cfg`` in the grammar :func:`load_config` reads; loading the text back gives an equal config."""
    lines = ["# effective configuration"]
    for name in SCHEMA:
        lines.append(f"[{name}]")
        for key, value in cfg.sections[name].items():
            lines.append(f"{key} = {value}".rstrip())
        lines.append("")
    return "\n".join(lines)


def parse_console(args: List[Any]) -> argparse.Namespace:
    """
    Parses the list as if it were a list of arguments given to a script.
    :param args: either console arguments from sys.argv or spoofed ones
    """
    common = argparse.ArgumentParser(add_help=False)
    """-------------------------------------------------------------------------------------------------------------
    FILES
    -------------------------------------------------------------------------------------------------------------"""
    files = common.add_argument_group("Files")
    files.add_argument(
        "--config",
        help="Sectioned key = value file; console options override its values."
    )
    files.add_argument(
        "--data",
        help="CSV file with header x1,...,xd,y and an optional weight column w."
    )
    files.add_argument(
        "--out",
        help=f"Folder to output artifacts into. Default: {DEFAULTS.destination}"
    )
    """-------------------------------------------------------------------------------------------------------------
    MODEL
    -------------------------------------------------------------------------------------------------------------"""
    model = common.add_argument_group("Model", "Shortcuts for the [kernel], [loss] and [lambda] sections")
    model.add_argument("--kernel", help=f"Kernel family. Default: {DEFAULTS.kernel}")
    model.add_argument("--gamma", help="Kernel width, a number or 'median' for the median heuristic.")
    model.add_argument("--loss", help=f"Loss family. Default: {DEFAULTS.loss}")
    model.add_argument("--sigma", help="Scale of the logistic regression loss.")
    model.add_argument("--lambda", dest="lam", help="Fixed regularisation; cross-validation runs when left out.")
    model.add_argument("--alpha", help=f"Confidence sets have level 1 - alpha. Default: {DEFAULTS.alpha}")
    """-------------------------------------------------------------------------------------------------------------
    SIMULATION
    -------------------------------------------------------------------------------------------------------------"""
    simulation = common.add_argument_group("Simulation")
    simulation.add_argument("--preset", help="Named coverage study, e.g. univariate-1d or gradient-2d.")
    simulation.add_argument("--scenario", help="Data-generating model, univariate or bivariate.")
    simulation.add_argument("--n", help="Sample size per replication.")
    simulation.add_argument("--replications", help="Number of replications.")
    simulation.add_argument("--seed", help=f"Root seed of every random stream. Default: {DEFAULTS.seed}")
    simulation.add_argument("--workers", help="Worker processes; results do not depend on it.")
    """-------------------------------------------------------------------------------------------------------------
    OVERRIDES
    -------------------------------------------------------------------------------------------------------------"""
    overrides = common.add_argument_group("Overrides")
    overrides.add_argument(
        "--verify",
        action="store_true",
        default=None,
        help="ci only: compare the fast covariance path against a dense solve and report the gap."
    )
    overrides.add_argument(
        "--set",
        action="append",
        default=[],
        dest="overrides",
        metavar="SECTION.KEY=VALUE",
        help="Set any configuration key, may be repeated."
    )
    overrides.add_argument(
        "--log-level",
        type=str.upper,
        choices=errors.LEVELS,
        help="Console logging level, e.g. DEBUG to follow every Newton step. Not part of the configuration."
    )

    console_arguments = argparse.ArgumentParser(
        fromfile_prefix_chars="@",
        prog="rkhs_confidence",
        description="Regularised kernel fits with asymptotic confidence sets for functionals of the fit."
    )
    console_arguments.add_argument(
        '--version',
        action='version',
        version='%(prog)s 0.1'
    )
    commands = console_arguments.add_subparsers(dest="command", required=True, metavar="COMMAND")
    commands.add_parser("fit", parents=[common], help="Fit a model and write its coefficients.")
    commands.add_parser("ci", parents=[common], help="Confidence set for the configured functional.")
    commands.add_parser("simulate", parents=[common], help="Monte Carlo coverage study.")
    commands.add_parser("band", parents=[common], help="Pointwise intervals on a grid.")

    return console_arguments.parse_args(args)


# console shortcut -> (section, key)
SHORTCUTS: typing.Dict[str, typing.Tuple[str, str]] = {
    "command": ("task", "command"),
    "data": ("data", "path"),
    "out": ("output", "directory"),
    "kernel": ("kernel", "family"),
    "gamma": ("kernel", "gamma"),
    "loss": ("loss", "family"),
    "sigma": ("loss", "sigma"),
    "lam": ("lambda", "value"),
    "alpha": ("task", "alpha"),
    "preset": ("simulation", "preset"),
    "scenario": ("simulation", "scenario"),
    "n": ("simulation", "n"),
    "replications": ("simulation", "replications"),
    "seed": ("task", "seed"),
    "workers": ("simulation", "workers"),
    "verify": ("output", "verify"),
}


def from_console(args: List[Any]) -> RunConfig:
    """Parse ``args`` and merge them over the ``--config`` file."""
    namespace = parse_console(args)
    if namespace.log_level:
        errors.set_console_level(namespace.log_level)
    overrides = [(section, key, _text(getattr(namespace, option)))
                 for option, (section, key) in SHORTCUTS.items()
                 if getattr(namespace, option, None) is not None]
    overrides.extend(parse_override(text) for text in namespace.overrides)
    return load_config(namespace.config, overrides)
