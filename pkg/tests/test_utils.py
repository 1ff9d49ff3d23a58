from unittest import TestCase

import numpy as np

import tests.suppress as suppress
from rkhs_confidence import utils
from rkhs_confidence.utils import ContractViolationError, CouldNotLoadFileError, ExpectedValueError


class TestExpandPath(TestCase):
    @suppress.out
    def test_expand_path(self):
        # noinspection SpellCheckingInspection
        self.assertFalse(utils.expand_path("$HOME/whatever").startswith("$HOME"))
        # noinspection SpellCheckingInspection
        self.assertFalse(utils.expand_path('~/yes').startswith('~'))


class TestPoints(TestCase):
    def test_as_points(self):
        self.assertEqual((1, 1), utils.as_points(2.0).shape)
        self.assertEqual((3, 1), utils.as_points([1.0, 2.0, 3.0]).shape)
        self.assertEqual((2, 3), utils.as_points(np.zeros((2, 3))).shape)
        self.assertRaises(ContractViolationError, utils.as_points, np.zeros((2, 2, 2)))
        self.assertRaises(ContractViolationError, utils.as_points, [1.0, np.nan])

    def test_as_point(self):
        self.assertListEqual([1.0, 2.0], utils.as_point([[1.0, 2.0]], 2).tolist())
        self.assertRaises(ContractViolationError, utils.as_point, [1.0, 2.0], 3)
        self.assertRaises(ContractViolationError, utils.as_point, [np.inf], 1)


class TestExceptions(TestCase):
    def test_contract_violation_is_both(self):
        err = ContractViolationError("n >= 1", 0)
        self.assertIsInstance(err, ExpectedValueError)
        self.assertIsInstance(err, ValueError)
        self.assertEqual("Contract violated - expected n >= 1, got 0 instead.", str(err))
        self.assertEqual(0, err.actual_value)

    def test_could_not_load(self):
        err = CouldNotLoadFileError("nowhere.csv")
        self.assertEqual("nowhere.csv", err.path)
        self.assertIn("nowhere.csv", str(err))


class TestLoaders(TestCase):
    def test_csv_loader(self):
        with utils.CsvLoader().load("tests/files/data/toy.csv") as reader:
            self.assertListEqual(["x1", "y"], next(reader))

    def test_text_loader(self):
        with utils.TextLoader().load("tests/files/data/two-rows.csv") as text:
            self.assertEqual("x1,y\n0.5,1.0\n1.5,-0.25\n", text)

    def test_missing_file(self):
        with self.assertRaises(CouldNotLoadFileError):
            with utils.TextLoader().load("tests/files/data/does-not-exist.csv"):
                pass
        with self.assertRaises(CouldNotLoadFileError):
            with utils.TextLoader().load(None):
                pass
