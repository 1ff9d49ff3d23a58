"""
Reproducible random streams and the two data-generating models of the coverage studies.

Every replication draws from its own Philox stream keyed by ``(seed, index)``, so results do not depend on how
replications are spread over worker processes. Uniforms are built from the top 53 bits of the raw 64-bit output and
normals from them by Box-Muller, which keeps every draw bit-identical across platforms.
"""
from __future__ import annotations

import math
import typing

import numpy as np

from rkhs_confidence.solver import Dataset
from rkhs_confidence.utils import ContractViolationError

RandomSource = typing.Union[int, np.random.Generator]

UNIVARIATE = "univariate"
BIVARIATE = "bivariate"
SCENARIOS = (UNIVARIATE, BIVARIATE)

# indices at and above this offset are reserved for reference fits, replications count up from 1
ORACLE_STREAM = 2 ** 32


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for replication ``index`` of the run seeded with ``seed``."""
    if int(seed) != seed or not 0 <= seed < 2 ** 64:
        raise ContractViolationError("a seed in [0, 2^64)", seed)
    if int(index) != index or not 0 <= index < 2 ** 64:
        raise ContractViolationError("a stream index in [0, 2^64)", index)
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _generator(source: RandomSource) -> np.random.Generator:
    return source if isinstance(source, np.random.Generator) else stream(source, 0)


def uniform(rng: np.random.Generator, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """``size`` draws from ``[low, high)``."""
    raw = rng.bit_generator.random_raw(size)
    unit = (np.asarray(raw, dtype=np.uint64) >> np.uint64(11)).astype(float) * 2.0 ** -53
    return low + (high - low) * unit


def standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    # 1 - u lies in (0, 1], log stays finite
    radius = np.sqrt(-2.0 * np.log(1.0 - uniform(rng, size)))
    return radius * np.cos(2.0 * math.pi * uniform(rng, size))


def regression_function(x: typing.Any) -> np.ndarray:
    """``log(x + 2) + 0.7 sin(3x) + 0.7 cos(2x)``."""
    x = np.asarray(x, dtype=float)
    return np.log(x + 2.0) + 0.7 * np.sin(3.0 * x) + 0.7 * np.cos(2.0 * x)


def bivariate_surface(xs: typing.Any) -> np.ndarray:
    """The first coordinate through :func:`regression_function` plus ``sin(1.5 x_2)``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return regression_function(xs[:, 0]) + np.sin(1.5 * xs[:, 1])


def _check_n(n: int):
    if int(n) != n or n < 1:
        raise ContractViolationError("n >= 1", n)


def gen_univariate(n: int, seed: RandomSource) -> Dataset:
    """``x ~ U[0, 5]``, ``y = regression_function(x) + N(0, 1)``."""
    _check_n(n)
    rng = _generator(seed)
    xs = uniform(rng, n, 0.0, 5.0)
    noise = standard_normal(rng, n)
    return Dataset(xs.reshape(-1, 1), regression_function(xs) + noise)


def gen_bivariate(n: int, seed: RandomSource) -> Dataset:
    """``x_1 ~ U[0, 5]``, ``x_2 ~ U[-1, 1]``, ``y = bivariate_surface(x) + N(0, 1)``."""
    _check_n(n)
    rng = _generator(seed)
    first = uniform(rng, n, 0.0, 5.0)
    second = uniform(rng, n, -1.0, 1.0)
    noise = standard_normal(rng, n)
    xs = np.column_stack([first, second])
    return Dataset(xs, bivariate_surface(xs) + noise)


def generate(scenario: str, n: int, seed: RandomSource) -> Dataset:
    if scenario == UNIVARIATE:
        return gen_univariate(n, seed)
    if scenario == BIVARIATE:
        return gen_bivariate(n, seed)
    raise ContractViolationError(f"a scenario in {SCENARIOS}", scenario)


def true_function(scenario: str) -> typing.Callable[[np.ndarray], np.ndarray]:
    """Noise-free regression function of ``scenario`` on an ``n x d`` array."""
    if scenario == UNIVARIATE:
        return lambda xs: regression_function(np.asarray(xs, dtype=float).reshape(-1))
    if scenario == BIVARIATE:
        return bivariate_surface
    raise ContractViolationError(f"a scenario in {SCENARIOS}", scenario)


def input_box(scenario: str) -> typing.Tuple[typing.Tuple[float, ...], typing.Tuple[float, ...]]:
    """Support of the covariates as ``(lower, upper)``."""
    if scenario == UNIVARIATE:
        return (0.0,), (5.0,)
    if scenario == BIVARIATE:
        return (0.0, -1.0), (5.0, 1.0)
    raise ContractViolationError(f"a scenario in {SCENARIOS}", scenario)
