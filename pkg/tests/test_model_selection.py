import math
from unittest import TestCase, mock

import numpy as np

from rkhs_confidence import losses, model_selection, solver
from rkhs_confidence.kernels import KernelSpec
from rkhs_confidence.losses import LossSpec
from rkhs_confidence.model_selection import CrossValidation, FoldFitError
from rkhs_confidence.solver import Dataset, SolverFailureError
from rkhs_confidence.utils import ContractViolationError

GRID = [1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 0.01]
LOGISTIC = LossSpec(losses.LOGISTIC_REGRESSION, 0.5)


def sine_data(n: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 5.0, size=n)
    return Dataset(xs, np.sin(xs) + 0.3 * rng.normal(size=n))


class TestConstrainGrid(TestCase):
    def test_wide_window_keeps_everything(self):
        # 1 / sqrt(500 ln 500) is about 0.0179
        self.assertListEqual(GRID, model_selection.constrain_grid(GRID, 1e-5, 1.0, 500))

    def test_narrow_window(self):
        self.assertListEqual([1e-5, 5e-5, 1e-4], model_selection.constrain_grid(GRID, 1e-5, 0.01, 500))

    def test_lambda0_is_always_kept(self):
        self.assertListEqual([0.002, 0.003], model_selection.constrain_grid([0.5, 0.003, 1e-5], 0.002, 0.1, 1000))
        self.assertListEqual([0.1], model_selection.constrain_grid(GRID, 0.1, 0.0, 100))

    def test_sorted_and_unique(self):
        self.assertListEqual([1e-5, 1e-4], model_selection.constrain_grid([1e-4, 1e-5, 1e-4], 1e-5, 1.0, 100))

    def test_window_shrinks_with_n(self):
        sizes = [len(model_selection.constrain_grid(GRID, 1e-5, 0.05, n)) for n in (100, 10_000, 1_000_000)]
        self.assertListEqual(sorted(sizes, reverse=True), sizes)

    def test_invalid(self):
        self.assertRaises(ContractViolationError, model_selection.constrain_grid, GRID, 0.0, 1.0, 100)
        self.assertRaises(ContractViolationError, model_selection.constrain_grid, GRID, 1e-5, -1.0, 100)
        self.assertRaises(ContractViolationError, model_selection.constrain_grid, GRID, 1e-5, 1.0, 1)


class TestFolds(TestCase):
    def test_partition(self):
        folds = model_selection.fold_partition(23, 5, 0)
        self.assertEqual(5, len(folds))
        self.assertListEqual(list(range(23)), sorted(np.concatenate(folds).tolist()))
        self.assertLessEqual(max(map(len, folds)) - min(map(len, folds)), 1)

    def test_seeded(self):
        first = model_selection.fold_partition(20, 4, 7)
        second = model_selection.fold_partition(20, 4, 7)
        for a, b in zip(first, second):
            self.assertListEqual(a.tolist(), b.tolist())

    def test_invalid(self):
        self.assertRaises(ContractViolationError, model_selection.fold_partition, 10, 1)
        self.assertRaises(ContractViolationError, model_selection.fold_partition, 3, 5)


class TestCrossValidation(TestCase):
    def test_avoids_underfitting(self):
        data = sine_data(80, 1)
        selection = CrossValidation(KernelSpec(), LOGISTIC, 5).select(data, [10.0, 1e-3, 1e-2], seed=3)
        self.assertTupleEqual((1e-3, 1e-2, 10.0), selection.grid)
        self.assertNotEqual(10.0, selection.lam)
        self.assertEqual(3, len(selection.cv_losses))
        self.assertEqual(min(selection.cv_losses), selection.cv_losses[selection.grid.index(selection.lam)])

    def test_deterministic(self):
        data = sine_data(40, 2)
        first = model_selection.cv_select(data, KernelSpec(), LOGISTIC, [1e-4, 1e-2, 1.0], 4, 11)
        second = model_selection.cv_select(data, KernelSpec(), LOGISTIC, [1e-4, 1e-2, 1.0], 4, 11)
        self.assertEqual(first, second)

    def test_singleton_grid(self):
        selection = CrossValidation(KernelSpec(), LOGISTIC).select(sine_data(10, 0), [0.01, 0.01])
        self.assertEqual(0.01, selection.lam)
        self.assertTrue(math.isnan(selection.cv_losses[0]))

    def test_invalid_grid(self):
        cv = CrossValidation(KernelSpec(), LOGISTIC)
        self.assertRaises(ContractViolationError, cv.select, sine_data(10, 0), [])
        self.assertRaises(ContractViolationError, cv.select, sine_data(10, 0), [0.0, 0.1])

    def test_fold_failure(self):
        with mock.patch("rkhs_confidence.solver.fit", side_effect=SolverFailureError(100, 1.0, 2.0)):
            with self.assertRaises(FoldFitError) as cm:
                CrossValidation(KernelSpec(), LOGISTIC, 3).select(sine_data(12, 0), [1e-3, 1e-2], seed=0)
        self.assertEqual(0, cm.exception.fold)
        self.assertEqual(1e-3, cm.exception.lam)
        self.assertIsInstance(cm.exception.__cause__, SolverFailureError)

    def test_held_out_loss_is_weighted(self):
        rng = np.random.default_rng(5)
        xs = rng.uniform(0.0, 5.0, size=24)
        weights = rng.integers(1, 4, size=24).astype(float)
        data = Dataset(xs, np.sin(xs) + 0.3 * rng.normal(size=24), weights=weights)
        grid = [1e-3, 1e-1]
        selection = CrossValidation(KernelSpec(), LOGISTIC, 4).select(data, grid, seed=7)
        expected = np.zeros(2)
        for held_out in model_selection.fold_partition(24, 4, 7):
            training = data.subset(np.setdiff1d(np.arange(24), held_out))
            for position, lam in enumerate(grid):
                model = solver.fit(training, KernelSpec(), LOGISTIC, lam)
                expected[position] += weights[held_out] @ losses.loss(LOGISTIC, data.xs[held_out], data.ys[held_out],
                                                                      model.evaluate(data.xs[held_out])) / weights.sum()
        self.assertTrue(np.allclose(expected, selection.cv_losses, rtol=1e-12))

